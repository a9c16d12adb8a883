//! Natural cubic spline reparameterized by arc length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// Cubic `p0 + p1 u + p2 u^2 + p3 u^3` in the local chord parameter `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Cubic([f64; 4]);

impl Cubic {
    fn eval(&self, u: f64) -> f64 {
        let c = &self.0;
        c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    }
    fn d1(&self, u: f64) -> f64 {
        let c = &self.0;
        c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])
    }
    fn d2(&self, u: f64) -> f64 {
        2.0 * self.0[2] + 6.0 * self.0[3] * u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Segment {
    /// Chord-parameter length of the segment.
    h: f64,
    x: Cubic,
    y: Cubic,
    /// Arc length at the segment start.
    s0: f64,
    /// Arc length of the segment.
    len: f64,
}

/// A point on the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub x: f64,
    pub y: f64,
    /// Tangent heading [rad].
    pub heading: f64,
    /// Signed curvature [1/m], positive turning left.
    pub curvature: f64,
    /// `true` when the query was outside `[0, L]` and got clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpline {
    waypoints: Vec<(f64, f64)>,
    segments: Vec<Segment>,
    length: f64,
}

impl PathSpline {
    /// Fits a natural cubic spline through at least four waypoints.
    pub fn build(waypoints: &[(f64, f64)]) -> Result<Self> {
        if waypoints.len() < 4 {
            return Err(Error::InvalidInput(format!("a path needs at least 4 waypoints, got {}", waypoints.len())));
        }
        let mut chords = Vec::with_capacity(waypoints.len() - 1);
        for (i, w) in waypoints.windows(2).enumerate() {
            let h = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            if !(h > 1e-9) {
                return Err(Error::InvalidInput(format!("duplicate consecutive waypoints at index {}", i + 1)));
            }
            chords.push(h);
        }
        let xs: Vec<f64> = waypoints.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = waypoints.iter().map(|p| p.1).collect();
        let cx = natural_cubic(&xs, &chords);
        let cy = natural_cubic(&ys, &chords);

        let mut segments = Vec::with_capacity(chords.len());
        let mut s0 = 0.0;
        for (i, &h) in chords.iter().enumerate() {
            let mut seg = Segment { h, x: cx[i], y: cy[i], s0, len: 0.0 };
            seg.len = seg.arc_length(h);
            s0 += seg.len;
            segments.push(seg);
        }
        Ok(Self { waypoints: waypoints.to_vec(), segments, length: s0 })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn waypoints(&self) -> &[(f64, f64)] {
        &self.waypoints
    }

    /// Arc length at the start of each segment, plus the total.
    pub fn knot_arc_lengths(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.s0).collect();
        v.push(self.length);
        v
    }

    fn locate(&self, s: f64) -> (&Segment, f64) {
        let idx = self.segments.partition_point(|seg| seg.s0 <= s).saturating_sub(1);
        let seg = &self.segments[idx];
        (seg, seg.param_at(s - seg.s0))
    }

    /// Position, heading and curvature at arc length `s`, clamped to `[0, L]`.
    pub fn evaluate(&self, s: f64) -> PathPoint {
        let clamped = !(0.0..=self.length).contains(&s);
        let s = s.clamp(0.0, self.length);
        let (seg, u) = self.locate(s);
        let (dx, dy) = (seg.x.d1(u), seg.y.d1(u));
        let (ddx, ddy) = (seg.x.d2(u), seg.y.d2(u));
        let speed2 = dx * dx + dy * dy;
        PathPoint {
            x: seg.x.eval(u),
            y: seg.y.eval(u),
            heading: dy.atan2(dx),
            curvature: (dx * ddy - dy * ddx) / (speed2 * speed2.sqrt()),
            clamped,
        }
    }

    /// Arc length of the path point closest to `(x, y)`, searched locally
    /// around `guess`.
    pub fn project(&self, x: f64, y: f64, guess: f64) -> f64 {
        let mut s = guess.clamp(0.0, self.length);
        for _ in 0..20 {
            let p = self.evaluate(s);
            let (sh, ch) = p.heading.sin_cos();
            let lag = ch * (x - p.x) + sh * (y - p.y);
            let con = -sh * (x - p.x) + ch * (y - p.y);
            // Newton on d/ds of the squared distance.
            let denom = (1.0 - p.curvature * con).max(0.2);
            let next = (s + lag / denom).clamp(0.0, self.length);
            if (next - s).abs() < 1e-10 {
                return next;
            }
            s = next;
        }
        s
    }

    /// Samples `(s, x, y, heading, curvature)` every `ds` metres.
    pub fn sample(&self, ds: f64) -> Vec<(f64, PathPoint)> {
        let n = (self.length / ds).floor() as usize;
        let mut out: Vec<(f64, PathPoint)> = (0..=n)
            .map(|i| {
                let s = i as f64 * ds;
                (s, self.evaluate(s))
            })
            .collect();
        if out.last().is_some_and(|(s, _)| *s < self.length) {
            out.push((self.length, self.evaluate(self.length)));
        }
        out
    }
}

impl Segment {
    fn speed(&self, u: f64) -> f64 {
        self.x.d1(u).hypot(self.y.d1(u))
    }

    fn arc_length(&self, u: f64) -> f64 {
        let half = 0.5 * u;
        GL_NODES.iter().zip(GL_WEIGHTS).map(|(&n, w)| w * self.speed(half * (n + 1.0))).sum::<f64>() * half
    }

    /// Chord parameter whose arc length from the segment start is `ds`.
    fn param_at(&self, ds: f64) -> f64 {
        if ds <= 0.0 {
            return 0.0;
        }
        if ds >= self.len {
            return self.h;
        }
        let mut u = ds / self.len * self.h;
        for _ in 0..12 {
            let g = self.arc_length(u) - ds;
            let step = g / self.speed(u);
            u = (u - step).clamp(0.0, self.h);
            if step.abs() < 1e-13 * self.h.max(1.0) {
                break;
            }
        }
        u
    }
}

/// Per-segment cubics of a natural spline through `values` at chord spacing `h`.
fn natural_cubic(values: &[f64], h: &[f64]) -> Vec<Cubic> {
    let n = values.len();
    // second derivatives m_i, natural ends m_0 = m_{n-1} = 0
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((values[i + 2] - values[i + 1]) / h[i + 1] - (values[i + 1] - values[i]) / h[i]);
        }
        // Thomas algorithm, off-diagonals h[i+1]
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
        }
    }
    (0..n - 1)
        .map(|i| {
            let hi = h[i];
            let b = (values[i + 1] - values[i]) / hi - hi * (2.0 * m[i] + m[i + 1]) / 6.0;
            Cubic([values[i], b, m[i] / 2.0, (m[i + 1] - m[i]) / (6.0 * hi)])
        })
        .collect()
}
