//! Contouring, lag, obstacle and road-edge errors.

use serde::{Deserialize, Serialize};

use super::spline::PathSpline;
use crate::error::{Error, Result};

/// Lateral (`e_con`, positive left) and tangential (`e_lag`, positive ahead)
/// offsets of `(x, y)` from the path point at arc length `s`.
pub fn contouring_lag_errors(x: f64, y: f64, s: f64, spline: &PathSpline) -> (f64, f64) {
    let p = spline.evaluate(s);
    let (sh, ch) = p.heading.sin_cos();
    let (dx, dy) = (x - p.x, y - p.y);
    (-sh * dx + ch * dy, ch * dx + sh * dy)
}

/// Elliptical obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    /// Semi-axis along the obstacle heading [m].
    pub a: f64,
    /// Lateral semi-axis [m].
    pub b: f64,
    #[serde(default)]
    pub heading: f64,
    /// Inflation added to both semi-axes for the avoidance cost [m].
    #[serde(default)]
    pub margin: f64,
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::param("obstacle", "semi-axes must be strictly positive"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::param("obstacle.margin", "must be non-negative"));
        }
        Ok(())
    }

    /// Position in the obstacle frame.
    pub fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (sh, ch) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        (ch * dx + sh * dy, -sh * dx + ch * dy)
    }

    /// Normalized elliptical distance with both semi-axes grown by `inflate`.
    pub fn normalized_distance(&self, x: f64, y: f64, inflate: f64) -> f64 {
        let (lx, ly) = self.local(x, y);
        ((lx / (self.a + inflate)).powi(2) + (ly / (self.b + inflate)).powi(2)).sqrt()
    }

    /// Approximate metric clearance to the ellipse grown by `inflate`;
    /// negative inside.
    pub fn clearance(&self, x: f64, y: f64, inflate: f64) -> f64 {
        let d = self.normalized_distance(x, y, inflate);
        (d - 1.0) * (self.a + inflate).min(self.b + inflate)
    }
}

/// Hinge penetration of the margin-inflated ellipse: 0 outside, 1 at the centre.
pub fn obstacle_error(x: f64, y: f64, obstacle: &Obstacle) -> f64 {
    (1.0 - obstacle.normalized_distance(x, y, obstacle.margin)).max(0.0)
}

/// One constant-width stretch of road, valid from `s_start` until the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub s_start: f64,
    /// Left edge offset from the centerline [m].
    pub left: f64,
    /// Right edge offset from the centerline [m], below `left`.
    pub right: f64,
}

/// Road edges as piecewise-constant lateral offsets from the centerline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadEdges {
    segments: Vec<EdgeSegment>,
}

impl RoadEdges {
    pub fn new(mut segments: Vec<EdgeSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("road edges need at least one segment".into()));
        }
        segments.sort_by(|a, b| a.s_start.total_cmp(&b.s_start));
        for seg in &segments {
            if !(seg.left > seg.right) {
                return Err(Error::param("edges", format!("empty corridor at s = {}", seg.s_start)));
            }
        }
        Ok(Self { segments })
    }

    /// Constant corridor `[right, left]` along the whole path.
    pub fn constant(left: f64, right: f64) -> Result<Self> {
        Self::new(vec![EdgeSegment { s_start: 0.0, left, right }])
    }

    pub fn segments(&self) -> &[EdgeSegment] {
        &self.segments
    }

    /// `(left, right)` offsets at arc length `s`.
    pub fn at(&self, s: f64) -> (f64, f64) {
        let idx = self.segments.partition_point(|seg| seg.s_start <= s).saturating_sub(1);
        let seg = &self.segments[idx];
        (seg.left, seg.right)
    }
}

/// Hinge violation of the corridor shrunk by `half_width` on both sides.
pub fn edge_error_from_offset(e_con: f64, left: f64, right: f64, half_width: f64) -> f64 {
    (e_con - (left - half_width)).max(0.0) + ((right + half_width) - e_con).max(0.0)
}

pub fn edge_error(x: f64, y: f64, s: f64, edges: &RoadEdges, spline: &PathSpline, half_width: f64) -> f64 {
    let (e_con, _) = contouring_lag_errors(x, y, s, spline);
    let (left, right) = edges.at(s);
    edge_error_from_offset(e_con, left, right, half_width)
}
