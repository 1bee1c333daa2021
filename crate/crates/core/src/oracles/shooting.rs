//! Shooting solver for `a·u″ + f(u) = 0`, `u(0) = u(L) = 0` on an interval.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ode_solvers::dop_shared::OutputType;
use ode_solvers::{Dop853, System, Vector4};
use serde::{Deserialize, Serialize};

use crate::basis::{EigenBasis, GalerkinVector};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

/// State `(u, u′, ∫u′², ∫F(u))`.
type State = Vector4<f64>;

struct Oscillator {
    a: f64,
    nl: Arc<dyn Nonlinearity>,
}

impl System<f64, State> for Oscillator {
    fn system(&self, _x: f64, y: &State, dy: &mut State) {
        let x = [0.0];
        dy[0] = y[1];
        dy[1] = -self.nl.value(&x, y[0]) / self.a;
        dy[2] = y[1] * y[1];
        dy[3] = self.nl.primitive(&x, y[0]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootingConfig {
    /// Uniform intervals of the returned profile.
    pub intervals: usize,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Points of the logarithmic bracket scan.
    pub scan_points: usize,
    pub tolerance: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            intervals: 4096,
            slope_min: 1e-3,
            slope_max: 1e3,
            scan_points: 121,
            tolerance: 1e-12,
        }
    }
}

/// A solution of the local problem with a prescribed number of interior zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingSolution {
    pub length: f64,
    pub a: f64,
    /// `u′(0)`.
    pub slope: f64,
    pub zero_count: usize,
    /// Uniform grid, endpoints included.
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    /// `u(L)` as integrated.
    pub end_value: f64,
    /// `S = ∫u′²`.
    pub dirichlet_norm_sq: f64,
    /// `∫F(u)`.
    pub primitive_integral: f64,
    /// `(a/2)S − ∫F(u)`.
    pub energy: f64,
}

struct Shot {
    end: State,
    sign_changes: usize,
    peak: f64,
}

fn shoot_once(sys: &Oscillator, length: f64, slope: f64, tol: f64) -> Result<Shot> {
    let y0 = State::new(0.0, slope, 0.0, 0.0);
    let mut solver = Dop853::from_param(
        Oscillator {
            a: sys.a,
            nl: sys.nl.clone(),
        },
        0.0,
        length,
        length,
        y0,
        tol,
        tol,
        0.9,
        0.0,
        0.333,
        6.0,
        length,
        0.0,
        1_000_000,
        1000,
        OutputType::Sparse,
    );
    solver
        .integrate()
        .map_err(|e| Error::NoConvergence(format!("shooting integration at slope {slope}: {e:?}")))?;
    let (xs, ys) = solver.results().get();
    let mut sign_changes = 0;
    let mut prev = 0.0f64;
    let mut peak = 0.0f64;
    for (x, y) in xs.iter().zip(ys) {
        if *x <= 0.0 {
            continue;
        }
        let u = y[0];
        if !u.is_finite() {
            return Err(Error::NonFinite(format!("shooting profile at slope {slope}")));
        }
        peak = peak.max(u.abs());
        if u != 0.0 {
            if prev != 0.0 && u.signum() != prev.signum() {
                sign_changes += 1;
            }
            prev = u;
        }
    }
    let end = *ys.last().expect("integrator returns at least the initial state");
    Ok(Shot {
        end,
        sign_changes,
        peak,
    })
}

/// Finds the solution of `a·u″ + f(u) = 0` on `(0, L)` with exactly `zeros`
/// interior zeros and `u′(0) > 0`.
///
/// The number of zeros in `(0, L]` is nondecreasing in the initial slope for
/// superlinear `f`; a logarithmic scan brackets the slope at which it first
/// reaches `zeros + 1`, and bisection closes the bracket to rounding.
pub fn shoot(
    length: f64,
    a: f64,
    nl: Arc<dyn Nonlinearity>,
    zeros: usize,
    config: &ShootingConfig,
) -> Result<ShootingSolution> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::param("length", format!("must be positive, got {length}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::param("a", format!("must be positive, got {a}")));
    }
    if !nl.is_autonomous() || !nl.is_odd() {
        return Err(Error::param("nonlinearity", "shooting needs an autonomous, odd f"));
    }
    if !(config.slope_min > 0.0 && config.slope_max > config.slope_min && config.scan_points >= 2) {
        return Err(Error::param("slope bracket", "need 0 < slope_min < slope_max and two scan points"));
    }
    let sys = Oscillator { a, nl };
    let tol = config.tolerance;

    // u(L) vanishing for unrelated slopes means a linear resonance.
    let probe: Vec<Shot> = [config.slope_min, config.slope_max.sqrt() * config.slope_min.sqrt()]
        .iter()
        .map(|&s| shoot_once(&sys, length, s, tol))
        .collect::<Result<_>>()?;
    if probe.iter().all(|p| p.end[0].abs() <= 1e-9 * p.peak) {
        return Err(Error::Degenerate(
            "u(L) = 0 for every probed slope: the linearization is resonant".into(),
        ));
    }

    let ratio = (config.slope_max / config.slope_min).powf(1.0 / (config.scan_points - 1) as f64);
    let mut lo = None;
    let mut hi = None;
    let mut seen = Vec::new();
    let mut s = config.slope_min;
    for _ in 0..config.scan_points {
        let shot = shoot_once(&sys, length, s, tol)?;
        seen.push((s, shot.sign_changes));
        if shot.sign_changes > zeros {
            hi = Some(s);
            break;
        }
        lo = Some(s);
        s *= ratio;
    }
    let (mut lo, mut hi) = match (lo, hi) {
        (Some(l), Some(h)) => (l, h),
        _ => {
            let summary: Vec<String> = seen
                .iter()
                .step_by((seen.len() / 8).max(1))
                .map(|(s, z)| format!("s={s:.3e}:{z}"))
                .collect();
            return Err(Error::Bracket(format!(
                "no slope in [{:e}, {:e}] separates {} from {} zeros (scan: {})",
                config.slope_min,
                config.slope_max,
                zeros,
                zeros + 1,
                summary.join(", ")
            )));
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shoot_once(&sys, length, mid, tol)?.sign_changes > zeros {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let shot_lo = shoot_once(&sys, length, lo, tol)?;
    let shot_hi = shoot_once(&sys, length, hi, tol)?;
    let (slope, shot) = if shot_lo.end[0].abs() <= shot_hi.end[0].abs() {
        (lo, shot_lo)
    } else {
        (hi, shot_hi)
    };

    let n = config.intervals.max(2);
    let dx = length / n as f64;
    let mut dense = Dop853::new(
        Oscillator {
            a: sys.a,
            nl: sys.nl.clone(),
        },
        0.0,
        length,
        dx,
        State::new(0.0, slope, 0.0, 0.0),
        tol,
        tol,
    );
    dense
        .integrate()
        .map_err(|e| Error::NoConvergence(format!("profile integration: {e:?}")))?;
    let mut us: Vec<f64> = dense.y_out().iter().map(|y| y[0]).collect();
    us.truncate(n + 1);
    while us.len() < n + 1 {
        us.push(shot.end[0]);
    }
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
    let dirichlet = shot.end[2];
    let primitive = shot.end[3];
    Ok(ShootingSolution {
        length,
        a,
        slope,
        zero_count: zeros,
        xs,
        us,
        end_value: shot.end[0],
        dirichlet_norm_sq: dirichlet,
        primitive_integral: primitive,
        energy: 0.5 * a * dirichlet - primitive,
    })
}

impl ShootingSolution {
    /// Sign changes of the sampled profile in the open interval.
    pub fn interior_sign_changes(&self) -> usize {
        let n = self.us.len();
        let peak = self.us.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let mut prev = 0.0f64;
        let mut count = 0;
        for &u in &self.us[1..n - 1] {
            if u.abs() <= 1e-12 * peak {
                continue;
            }
            if prev != 0.0 && u.signum() != prev.signum() {
                count += 1;
            }
            prev = u;
        }
        count
    }

    /// Coefficients of the profile in a one-dimensional basis on the same
    /// interval, by the trapezoid rule on the profile grid. The odd periodic
    /// extension of the profile is smooth, so the rule converges spectrally.
    pub fn project(&self, basis: &EigenBasis) -> Result<GalerkinVector> {
        let lengths = basis.domain().lengths();
        if lengths.len() != 1 || (lengths[0] - self.length).abs() > 1e-12 * self.length {
            return Err(Error::InvalidDomain(
                "shooting profiles project only onto a basis on the same interval".into(),
            ));
        }
        let n = self.xs.len() - 1;
        let h = self.length / n as f64;
        let norm = (2.0 / self.length).sqrt();
        let coeffs = basis
            .modes()
            .iter()
            .map(|mode| {
                let k = mode.index[0] as f64 * std::f64::consts::PI / self.length;
                let inner: f64 = self.xs[1..n]
                    .iter()
                    .zip(&self.us[1..n])
                    .map(|(x, u)| u * (k * x).sin())
                    .sum();
                norm * h * inner
            })
            .collect();
        Ok(GalerkinVector::new(coeffs))
    }

    /// The profile multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Vec<f64> {
        self.us.iter().map(|u| t * u).collect()
    }

    /// Writes `x,u` rows.
    pub fn write_csv(&self, path: &Path, scale: f64) -> Result<()> {
        let mut out = String::from("x,u\n");
        for (x, u) in self.xs.iter().zip(&self.us) {
            out.push_str(&format!("{x:e},{:e}\n", scale * u));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
