//! Lateral tyre force curves: the Fiala brush model used by the prediction
//! model and the magic formula used by the surrogate plant.
//!
//! Sign convention: a positive slip angle produces a negative lateral force.

use serde::{Deserialize, Serialize};

/// Slip angle at which the Fiala brush model reaches full sliding.
pub fn fiala_sliding_angle(c_alpha: f64, f_z: f64, mu: f64) -> f64 {
    (3.0 * mu * f_z / c_alpha).atan()
}

/// Fiala brush-model lateral force.
///
/// Cubic in `tan(alpha)` below the sliding angle, saturated at
/// `-sign(alpha) * mu * f_z` above it.
pub fn fiala_lateral_force(alpha: f64, c_alpha: f64, f_z: f64, mu: f64) -> f64 {
    let peak = mu * f_z;
    if alpha.abs() >= fiala_sliding_angle(c_alpha, f_z, mu) {
        return -alpha.signum() * peak;
    }
    let t = alpha.tan();
    -c_alpha * t + c_alpha * c_alpha / (3.0 * peak) * t.abs() * t - c_alpha.powi(3) / (27.0 * peak * peak) * t.powi(3)
}

/// d F_y / d alpha of [`fiala_lateral_force`]. Continuous, zero in sliding.
pub fn fiala_slope(alpha: f64, c_alpha: f64, f_z: f64, mu: f64) -> f64 {
    if alpha.abs() >= fiala_sliding_angle(c_alpha, f_z, mu) {
        return 0.0;
    }
    let t = alpha.tan();
    let u = 1.0 - c_alpha * t.abs() / (3.0 * mu * f_z);
    -c_alpha * u * u * (1.0 + t * t)
}

/// One axle's magic-formula coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicFormula {
    pub b: f64,
    pub c: f64,
    /// Peak force [N].
    pub d: f64,
    pub e: f64,
}

impl MagicFormula {
    /// Coefficients whose small-angle slope `B*C*D` equals `c_alpha`.
    pub fn with_slope(c_alpha: f64, c: f64, d: f64, e: f64) -> Self {
        Self { b: c_alpha / (c * d), c, d, e }
    }

    pub fn cornering_stiffness(&self) -> f64 {
        self.b * self.c * self.d
    }

    pub fn lateral_force(&self, alpha: f64) -> f64 {
        pacejka_lateral_force(alpha, self)
    }
}

/// `-D sin(C atan(B a - E (B a - atan(B a))))`.
pub fn pacejka_lateral_force(alpha: f64, p: &MagicFormula) -> f64 {
    let ba = p.b * alpha;
    -p.d * (p.c * (ba - p.e * (ba - ba.atan())).atan()).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fiala_zero_slip() {
        assert_eq!(fiala_lateral_force(0.0, 80_000.0, 4000.0, 1.0), 0.0);
    }

    #[test]
    fn fiala_saturates_beyond_sliding_angle() {
        let (c, fz, mu) = (80_000.0, 4000.0, 1.0);
        let sl = fiala_sliding_angle(c, fz, mu);
        assert_eq!(fiala_lateral_force(sl, c, fz, mu), -mu * fz);
        assert_eq!(fiala_lateral_force(sl + 0.3, c, fz, mu), -mu * fz);
        assert_eq!(fiala_lateral_force(-sl - 0.01, c, fz, mu), mu * fz);
        // continuous at the boundary from below
        let below = fiala_lateral_force(sl * (1.0 - 1e-9), c, fz, mu);
        assert_relative_eq!(below, -mu * fz, max_relative = 1e-6);
    }

    /// Scalar evaluation of the brush cubic written out term by term.
    fn fiala_oracle(alpha: f64, c: f64, fz: f64, mu: f64) -> f64 {
        let t = alpha.tan();
        let a = c * t;
        let m = mu * fz;
        -a + a * a.abs() / (3.0 * m) - a * a * a / (27.0 * m * m)
    }

    #[test]
    fn fiala_reference_value() {
        // alpha=0.05 < atan(3*4000/80000)=0.1489, so the cubic branch applies.
        // Independent evaluation (python, double precision): -2816.29716084402
        let v = fiala_lateral_force(0.05, 80_000.0, 4000.0, 1.0);
        assert_relative_eq!(v, fiala_oracle(0.05, 80_000.0, 4000.0, 1.0), max_relative = 1e-14);
        assert_relative_eq!(v, -2816.297_160_844_02, max_relative = 1e-12);
    }

    #[test]
    fn fiala_slope_matches_finite_difference() {
        let (c, fz, mu) = (80_000.0, 8720.0, 1.0);
        for i in -40..=40 {
            let a = i as f64 * 0.01;
            let h = 1e-7;
            let fd = (fiala_lateral_force(a + h, c, fz, mu) - fiala_lateral_force(a - h, c, fz, mu)) / (2.0 * h);
            assert!((fiala_slope(a, c, fz, mu) - fd).abs() < 1e-3 * c, "alpha {a}");
        }
    }

    #[test]
    fn pacejka_reference_value() {
        // B=10, C=1.5, D=4000, E=-1, alpha=0.08:
        // independent evaluation: -3600.2180885831895
        let p = MagicFormula { b: 10.0, c: 1.5, d: 4000.0, e: -1.0 };
        let ba: f64 = 0.8;
        let oracle = -4000.0 * (1.5 * (ba - (-1.0) * (ba - ba.atan())).atan()).sin();
        assert_relative_eq!(pacejka_lateral_force(0.08, &p), oracle, max_relative = 1e-15);
        assert_relative_eq!(oracle, -3600.218_088_583_19, max_relative = 1e-12);
    }

    #[test]
    fn pacejka_odd() {
        let p = MagicFormula { b: 9.0, c: 1.6, d: 5000.0, e: -0.4 };
        assert_eq!(pacejka_lateral_force(0.0, &p), 0.0);
        for i in 1..50 {
            let a = i as f64 * 0.013;
            assert_eq!(pacejka_lateral_force(-a, &p), -pacejka_lateral_force(a, &p));
        }
    }

    #[test]
    fn slope_matched_magic_formula() {
        let p = MagicFormula::with_slope(80_000.0, 1.5, 8000.0, 0.0);
        assert_relative_eq!(p.cornering_stiffness(), 80_000.0, max_relative = 1e-12);
        assert_relative_eq!(p.lateral_force(1e-6) / 1e-6, -80_000.0, max_relative = 1e-6);
    }
}
