//! Rescaling local pure-power solutions into Kirchhoff solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::KirchhoffParams;

/// The root `t` of `t^{p−2} = a + bSt²`.
///
/// If `−Δw = κ|w|^{p−2}w` and `S = ‖w‖²`, then `u = tw` solves
/// `−(a + b‖u‖²)Δu = κ|u|^{p−2}u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactor {
    pub t: f64,
    pub source_norm_sq: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl ScalingFactor {
    /// `t^{p−2} − bSt² − a`, which vanishes at the root.
    pub fn defect(&self) -> f64 {
        self.t.powf(self.p - 2.0) - self.b * self.source_norm_sq * self.t * self.t - self.a
    }

    /// `Φ(tw) = (a/2)t²S + (b/4)t⁴S² − (κt^p/p)|w|_p^p`, given `κ|w|_p^p`.
    pub fn scaled_energy(&self, weighted_lp_pow: f64) -> f64 {
        let (t, s) = (self.t, self.source_norm_sq);
        0.5 * self.a * t * t * s + 0.25 * self.b * t.powi(4) * s * s - t.powf(self.p) / self.p * weighted_lp_pow
    }
}

/// Bisection for the unique positive root of `t^{p−2} − bSt² − a`.
///
/// For `p > 4` the function is negative at `0`, has one positive critical
/// point and tends to `+∞`, so the positive root is unique.
pub fn scaling_factor(source_norm_sq: f64, params: KirchhoffParams, p: f64) -> Result<ScalingFactor> {
    params.validate()?;
    if !(p.is_finite() && p > 4.0) {
        return Err(Error::param("p", format!("the scaling root is unique only for p > 4, got {p}")));
    }
    if !(source_norm_sq.is_finite() && source_norm_sq > 0.0) {
        return Err(Error::param("S", format!("must be positive, got {source_norm_sq}")));
    }
    let h = |t: f64| t.powf(p - 2.0) - params.b * source_norm_sq * t * t - params.a;
    let mut hi = 1.0;
    while h(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Bracket("scaling root escaped to infinity".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-16 * hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = if h(lo).abs() <= h(hi).abs() { lo } else { hi };
    Ok(ScalingFactor {
        t,
        source_norm_sq,
        a: params.a,
        b: params.b,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_zero_closed_form() {
        for a in [0.5, 1.0, 3.0] {
            let s = scaling_factor(2.0, KirchhoffParams::new(a, 0.0).unwrap(), 6.0).unwrap();
            assert!((s.t - a.powf(0.25)).abs() < 1e-14);
        }
    }

    #[test]
    fn golden_ratio_root() {
        let s = scaling_factor(1.0, KirchhoffParams::new(1.0, 1.0).unwrap(), 6.0).unwrap();
        let expected = ((1.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert!((s.t - expected).abs() < 1e-14, "{}", s.t);
        assert!((s.t - 1.272020).abs() < 1e-6);
        assert!(s.defect().abs() < 1e-12);
    }

    #[test]
    fn rejects_low_exponent() {
        assert!(scaling_factor(1.0, KirchhoffParams::new(1.0, 1.0).unwrap(), 4.0).is_err());
        assert!(scaling_factor(0.0, KirchhoffParams::new(1.0, 1.0).unwrap(), 6.0).is_err());
    }
}
