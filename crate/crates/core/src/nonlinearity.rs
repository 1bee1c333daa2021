//! Right-hand sides `f(x, u)` with their antiderivatives and growth data.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Carathéodory nonlinearity `f(x, u)` with `F(x, u) = ∫₀ᵘ f(x, s) ds`.
///
/// `x` is a point of the domain (one coordinate per axis). The metadata
/// methods describe the growth class the nonlinearity claims; [`check_hypotheses`]
/// samples it to confirm.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], u: f64) -> f64;
    fn primitive(&self, x: &[f64], u: f64) -> f64;
    /// `∂f/∂u`, used by Newton polishing.
    fn derivative(&self, x: &[f64], u: f64) -> f64;
    /// Subcritical growth exponent `p` in `|f| ≤ c(1 + |u|^{p−1})`.
    fn growth_exponent(&self) -> f64;
    /// Growth constant `c`.
    fn growth_constant(&self) -> f64;
    /// Exponent `μ` in `0 < μF ≤ uf`.
    fn ar_exponent(&self) -> f64;
    fn is_odd(&self) -> bool;
    fn is_autonomous(&self) -> bool {
        true
    }
    /// Exact `(c₅, c₆)` with `F(x,u) ≤ c₅|u|^p + c₆`, when known in closed form.
    fn primitive_bound(&self) -> Option<(f64, f64)> {
        None
    }
}

fn abs_pow(u: f64, e: f64) -> f64 {
    let a = u.abs();
    if e == e.trunc() && e.abs() < 64.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

/// `f(u) = κ|u|^{p−2}u`, `F(u) = κ|u|^p/p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    pub p: f64,
    pub coefficient: f64,
}

impl Power {
    pub fn new(p: f64) -> Self {
        Power { p, coefficient: 1.0 }
    }
}

impl Nonlinearity for Power {
    fn value(&self, _x: &[f64], u: f64) -> f64 {
        self.coefficient * abs_pow(u, self.p - 2.0) * u
    }
    fn primitive(&self, _x: &[f64], u: f64) -> f64 {
        self.coefficient * abs_pow(u, self.p) / self.p
    }
    fn derivative(&self, _x: &[f64], u: f64) -> f64 {
        self.coefficient * (self.p - 1.0) * abs_pow(u, self.p - 2.0)
    }
    fn growth_exponent(&self) -> f64 {
        self.p
    }
    fn growth_constant(&self) -> f64 {
        self.coefficient.abs()
    }
    fn ar_exponent(&self) -> f64 {
        self.p
    }
    fn is_odd(&self) -> bool {
        true
    }
    fn primitive_bound(&self) -> Option<(f64, f64)> {
        Some((self.coefficient / self.p, 0.0))
    }
}

/// `f(u) = Σ κ_i|u|^{p_i−2}u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSum {
    pub terms: Vec<Power>,
}

impl Nonlinearity for PowerSum {
    fn value(&self, x: &[f64], u: f64) -> f64 {
        self.terms.iter().map(|t| t.value(x, u)).sum()
    }
    fn primitive(&self, x: &[f64], u: f64) -> f64 {
        self.terms.iter().map(|t| t.primitive(x, u)).sum()
    }
    fn derivative(&self, x: &[f64], u: f64) -> f64 {
        self.terms.iter().map(|t| t.derivative(x, u)).sum()
    }
    fn growth_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.p).fold(2.0, f64::max)
    }
    fn growth_constant(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }
    fn ar_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.p).fold(f64::INFINITY, f64::min)
    }
    fn is_odd(&self) -> bool {
        true
    }
    fn primitive_bound(&self) -> Option<(f64, f64)> {
        // κ|u|^q/q ≤ κ/q·(1 + |u|^p) for q ≤ p, κ ≥ 0.
        let p = self.growth_exponent();
        let mut c5 = 0.0;
        let mut c6 = 0.0;
        for t in &self.terms {
            if t.coefficient < 0.0 {
                return None;
            }
            c5 += t.coefficient / t.p;
            if t.p < p {
                c6 += t.coefficient / t.p;
            }
        }
        Some((c5, c6))
    }
}

/// `f(u) = s·u`. Outside the superquartic class; kept for linear checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub slope: f64,
}

impl Nonlinearity for Linear {
    fn value(&self, _x: &[f64], u: f64) -> f64 {
        self.slope * u
    }
    fn primitive(&self, _x: &[f64], u: f64) -> f64 {
        0.5 * self.slope * u * u
    }
    fn derivative(&self, _x: &[f64], _u: f64) -> f64 {
        self.slope
    }
    fn growth_exponent(&self) -> f64 {
        2.0
    }
    fn growth_constant(&self) -> f64 {
        self.slope.abs()
    }
    fn ar_exponent(&self) -> f64 {
        2.0
    }
    fn is_odd(&self) -> bool {
        true
    }
    fn primitive_bound(&self) -> Option<(f64, f64)> {
        Some((0.5 * self.slope.max(0.0), 0.0))
    }
}

/// Odd extension of a piecewise-linear table on `u ≥ 0`, continued past the
/// last knot by `f(u_n)(u/u_n)^{p−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    u: Vec<f64>,
    f: Vec<f64>,
    /// `F` at each knot.
    cumulative: Vec<f64>,
    tail_exponent: f64,
    mu: f64,
}

impl Tabulated {
    pub fn new(u: Vec<f64>, f: Vec<f64>, tail_exponent: f64) -> Result<Self> {
        if u.len() != f.len() || u.len() < 2 {
            return Err(Error::param(
                "nonlinearity.table",
                "need matching `u` and `f` arrays with at least two knots",
            ));
        }
        if u[0] != 0.0 || f[0] != 0.0 {
            return Err(Error::param("nonlinearity.table", "table must start at (0, 0)"));
        }
        if !u.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::param("nonlinearity.table", "`u` knots must be strictly increasing"));
        }
        if !(tail_exponent > 2.0) {
            return Err(Error::param(
                "nonlinearity.tail_exponent",
                format!("must exceed 2, got {tail_exponent}"),
            ));
        }
        let mut cumulative = vec![0.0; u.len()];
        for i in 1..u.len() {
            cumulative[i] = cumulative[i - 1] + 0.5 * (f[i] + f[i - 1]) * (u[i] - u[i - 1]);
        }
        let mut t = Tabulated {
            u,
            f,
            cumulative,
            tail_exponent,
            mu: 0.0,
        };
        // Largest μ with μF ≤ uf on the knots and in the tail.
        let mut mu = tail_exponent;
        for i in 1..t.u.len() {
            let fi = t.cumulative[i];
            if fi > 0.0 {
                mu = mu.min(t.u[i] * t.f[i] / fi);
            }
        }
        t.mu = mu;
        Ok(t)
    }

    fn locate(&self, a: f64) -> usize {
        match self.u.binary_search_by(|k| k.partial_cmp(&a).unwrap()) {
            Ok(i) => i.min(self.u.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.u.len() - 2),
        }
    }

    fn eval_pos(&self, a: f64) -> (f64, f64, f64) {
        let n = self.u.len() - 1;
        let (un, fn_) = (self.u[n], self.f[n]);
        if a > un {
            let e = self.tail_exponent;
            let r = a / un;
            let val = fn_ * r.powf(e - 1.0);
            let prim = self.cumulative[n] + fn_ * un / e * (r.powf(e) - 1.0);
            let der = fn_ * (e - 1.0) / un * r.powf(e - 2.0);
            return (val, prim, der);
        }
        let i = self.locate(a);
        let (u0, u1, f0, f1) = (self.u[i], self.u[i + 1], self.f[i], self.f[i + 1]);
        let slope = (f1 - f0) / (u1 - u0);
        let val = f0 + slope * (a - u0);
        let prim = self.cumulative[i] + 0.5 * (f0 + val) * (a - u0);
        (val, prim, slope)
    }
}

impl Nonlinearity for Tabulated {
    fn value(&self, _x: &[f64], u: f64) -> f64 {
        self.eval_pos(u.abs()).0 * u.signum()
    }
    fn primitive(&self, _x: &[f64], u: f64) -> f64 {
        self.eval_pos(u.abs()).1
    }
    fn derivative(&self, _x: &[f64], u: f64) -> f64 {
        self.eval_pos(u.abs()).2
    }
    fn growth_exponent(&self) -> f64 {
        self.tail_exponent
    }
    fn growth_constant(&self) -> f64 {
        let n = self.u.len() - 1;
        let peak = self.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        peak.max(self.f[n].abs() / self.u[n].powf(self.tail_exponent - 1.0))
    }
    fn ar_exponent(&self) -> f64 {
        self.mu
    }
    fn is_odd(&self) -> bool {
        true
    }
}

/// `(x, u) ↦ value`.
pub type PointFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Closure-backed nonlinearity, including `x`-dependent ones.
#[derive(Clone)]
pub struct Custom {
    pub f: PointFn,
    pub primitive: PointFn,
    pub derivative: PointFn,
    pub p: f64,
    pub mu: f64,
    pub c: f64,
    pub odd: bool,
    pub autonomous: bool,
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom")
            .field("p", &self.p)
            .field("mu", &self.mu)
            .field("c", &self.c)
            .field("odd", &self.odd)
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl Nonlinearity for Custom {
    fn value(&self, x: &[f64], u: f64) -> f64 {
        (self.f)(x, u)
    }
    fn primitive(&self, x: &[f64], u: f64) -> f64 {
        (self.primitive)(x, u)
    }
    fn derivative(&self, x: &[f64], u: f64) -> f64 {
        (self.derivative)(x, u)
    }
    fn growth_exponent(&self) -> f64 {
        self.p
    }
    fn growth_constant(&self) -> f64 {
        self.c
    }
    fn ar_exponent(&self) -> f64 {
        self.mu
    }
    fn is_odd(&self) -> bool {
        self.odd
    }
    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

fn default_coefficient() -> f64 {
    1.0
}

/// Serializable description of the built-in nonlinearities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Power {
        p: f64,
        #[serde(default = "default_coefficient")]
        coefficient: f64,
    },
    PowerSum {
        exponents: Vec<f64>,
        coefficients: Vec<f64>,
    },
    Linear {
        slope: f64,
    },
    Tabulated {
        u: Vec<f64>,
        f: Vec<f64>,
        tail_exponent: f64,
    },
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Arc<dyn Nonlinearity>> {
        Ok(match self {
            NonlinearitySpec::Power { p, coefficient } => {
                if !(p.is_finite() && *p > 2.0) {
                    return Err(Error::param("nonlinearity.p", format!("must exceed 2, got {p}")));
                }
                if !(coefficient.is_finite() && *coefficient > 0.0) {
                    return Err(Error::param(
                        "nonlinearity.coefficient",
                        format!("must be positive, got {coefficient}"),
                    ));
                }
                Arc::new(Power {
                    p: *p,
                    coefficient: *coefficient,
                })
            }
            NonlinearitySpec::PowerSum {
                exponents,
                coefficients,
            } => {
                if exponents.is_empty() || exponents.len() != coefficients.len() {
                    return Err(Error::param(
                        "nonlinearity.exponents",
                        "need one coefficient per exponent and at least one term",
                    ));
                }
                if exponents.iter().any(|p| !(p.is_finite() && *p > 2.0)) {
                    return Err(Error::param("nonlinearity.exponents", "every exponent must exceed 2"));
                }
                if coefficients.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    return Err(Error::param("nonlinearity.coefficients", "coefficients must be positive"));
                }
                Arc::new(PowerSum {
                    terms: exponents
                        .iter()
                        .zip(coefficients)
                        .map(|(&p, &c)| Power { p, coefficient: c })
                        .collect(),
                })
            }
            NonlinearitySpec::Linear { slope } => {
                if !slope.is_finite() {
                    return Err(Error::param("nonlinearity.slope", "must be finite"));
                }
                Arc::new(Linear { slope: *slope })
            }
            NonlinearitySpec::Tabulated { u, f, tail_exponent } => {
                Arc::new(Tabulated::new(u.clone(), f.clone(), *tail_exponent)?)
            }
        })
    }
}

/// Outcome of sampling the structural hypotheses on `f`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub growth_ok: bool,
    pub small_u_ok: bool,
    pub ambrosetti_rabinowitz_ok: bool,
    pub odd_ok: bool,
    pub warnings: Vec<String>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.growth_ok && self.small_u_ok && self.ambrosetti_rabinowitz_ok && self.odd_ok
    }
}

/// Samples the growth bound, `f = o(|u|)` at zero, the Ambrosetti–Rabinowitz
/// inequality with `μ > 4`, and oddness at the given points `xs` of a domain of
/// dimension `dim`. Violations are reported as warnings, never as errors.
pub fn check_hypotheses(nl: &dyn Nonlinearity, dim: usize, xs: &[Vec<f64>]) -> HypothesisReport {
    let mut report = HypothesisReport {
        growth_ok: true,
        small_u_ok: true,
        ambrosetti_rabinowitz_ok: true,
        odd_ok: true,
        warnings: Vec::new(),
    };
    let p = nl.growth_exponent();
    let exponent_ok = if dim <= 2 { p > 4.0 } else { p > 4.0 && p < 6.0 };
    if !exponent_ok {
        report.growth_ok = false;
        let range = if dim <= 2 { "p > 4" } else { "4 < p < 6" };
        report
            .warnings
            .push(format!("growth: exponent p = {p} outside {range} for dimension {dim}"));
    }
    let default_x = [vec![0.0; dim.max(1)]];
    let xs = if xs.is_empty() { &default_x[..] } else { xs };
    let amplitudes: Vec<f64> = (0..=36).map(|i| 10f64.powf(-6.0 + i as f64 * 0.25)).collect();
    let c = nl.growth_constant();
    let mu = nl.ar_exponent();
    if !(mu > 4.0) {
        report.ambrosetti_rabinowitz_ok = false;
        report
            .warnings
            .push(format!("Ambrosetti–Rabinowitz: exponent μ = {mu} is not above 4"));
    }
    let mut growth_violation = 0.0f64;
    let mut ar_violation = 0.0f64;
    let mut odd_violation = 0.0f64;
    for x in xs {
        for &a in &amplitudes {
            for u in [a, -a] {
                let f = nl.value(x, u);
                let big_f = nl.primitive(x, u);
                let bound = c * (1.0 + u.abs().powf(p - 1.0));
                growth_violation = growth_violation.max((f.abs() - bound) / bound);
                if mu.is_finite() {
                    let lhs = mu * big_f;
                    let rhs = u * f;
                    let scale = rhs.abs().max(f64::MIN_POSITIVE);
                    if !(lhs > 0.0) || lhs > rhs + 1e-12 * scale {
                        ar_violation = ar_violation.max(if lhs > 0.0 { (lhs - rhs) / scale } else { 1.0 });
                    }
                }
                let odd = nl.value(x, -u) + f;
                odd_violation = odd_violation.max(odd.abs() / f.abs().max(1e-300));
            }
        }
        let ratios: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&u| nl.value(x, u).abs() / u)
            .collect();
        if !(ratios[2] <= 1e-3 && ratios[2] <= ratios[0]) {
            report.small_u_ok = false;
        }
    }
    if growth_violation > 1e-12 {
        report.growth_ok = false;
        report.warnings.push(format!(
            "growth: |f| exceeds c(1+|u|^(p-1)) by relative {growth_violation:.3e}"
        ));
    }
    if !report.small_u_ok {
        report
            .warnings
            .push("small-u: f(x,u)/u does not vanish as u → 0".to_string());
    }
    if ar_violation > 0.0 {
        report.ambrosetti_rabinowitz_ok = false;
        report.warnings.push(format!(
            "Ambrosetti–Rabinowitz: 0 < μF ≤ uf violated (relative {ar_violation:.3e})"
        ));
    }
    if odd_violation > 1e-12 || !nl.is_odd() {
        report.odd_ok = false;
        report.warnings.push("oddness: f(x,−u) ≠ −f(x,u)".to_string());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(nl: &dyn Nonlinearity, u: f64) -> (f64, f64) {
        let h = 1e-6 * u.abs().max(1.0);
        let x = [0.3];
        (
            (nl.primitive(&x, u + h) - nl.primitive(&x, u - h)) / (2.0 * h),
            (nl.value(&x, u + h) - nl.value(&x, u - h)) / (2.0 * h),
        )
    }

    #[test]
    fn primitives_and_derivatives_are_consistent() {
        let table = Tabulated::new(vec![0.0, 0.5, 1.0, 2.0], vec![0.0, 0.03, 0.5, 20.0], 6.0).unwrap();
        let nls: Vec<Box<dyn Nonlinearity>> = vec![
            Box::new(Power::new(6.0)),
            Box::new(Power { p: 5.5, coefficient: 2.0 }),
            Box::new(PowerSum {
                terms: vec![Power::new(6.0), Power { p: 5.0, coefficient: 0.5 }],
            }),
            Box::new(Linear { slope: 3.0 }),
            Box::new(table),
        ];
        for nl in &nls {
            for u in [-2.7, -0.8, 0.3, 0.75, 1.4, 3.1] {
                let (df, dd) = fd(nl.as_ref(), u);
                let x = [0.3];
                let f = nl.value(&x, u);
                assert!((df - f).abs() <= 1e-6 * (1.0 + f.abs()), "{nl:?} F' at {u}: {df} vs {f}");
                let d = nl.derivative(&x, u);
                assert!((dd - d).abs() <= 1e-5 * (1.0 + d.abs()), "{nl:?} f' at {u}: {dd} vs {d}");
            }
        }
    }

    #[test]
    fn pure_power_satisfies_hypotheses() {
        let r = check_hypotheses(&Power::new(6.0), 1, &[vec![0.5]]);
        assert!(r.all_hold(), "{r:?}");
        assert!(r.warnings.is_empty());
        let r = check_hypotheses(&Power::new(5.0), 3, &[]);
        assert!(r.all_hold(), "{r:?}");
    }

    #[test]
    fn low_exponent_is_flagged() {
        let r = check_hypotheses(&Power::new(3.0), 1, &[]);
        assert!(!r.growth_ok);
        assert!(r.warnings.iter().any(|w| w.contains("outside p > 4")), "{:?}", r.warnings);
        assert!(!r.ambrosetti_rabinowitz_ok);
        let r = check_hypotheses(&Power::new(6.0), 3, &[]);
        assert!(!r.growth_ok, "p = 6 is critical in three dimensions");
    }

    #[test]
    fn linear_fails_small_u_and_ar() {
        let r = check_hypotheses(&Linear { slope: 1.0 }, 1, &[]);
        assert!(!r.small_u_ok);
        assert!(!r.ambrosetti_rabinowitz_ok);
        assert!(r.odd_ok);
    }

    #[test]
    fn non_odd_custom_is_flagged() {
        let nl = Custom {
            f: Arc::new(|_x: &[f64], u: f64| u.powi(5) + u.powi(6)),
            primitive: Arc::new(|_x: &[f64], u: f64| u.powi(6) / 6.0 + u.powi(7) / 7.0),
            derivative: Arc::new(|_x: &[f64], u: f64| 5.0 * u.powi(4) + 6.0 * u.powi(5)),
            p: 7.0,
            mu: 6.0,
            c: 2.0,
            odd: false,
            autonomous: true,
        };
        let r = check_hypotheses(&nl, 1, &[]);
        assert!(!r.odd_ok);
    }

    #[test]
    fn descriptor_validation() {
        assert!(NonlinearitySpec::Power { p: 2.0, coefficient: 1.0 }.build().is_err());
        assert!(NonlinearitySpec::Power { p: 6.0, coefficient: -1.0 }.build().is_err());
        assert!(NonlinearitySpec::PowerSum { exponents: vec![6.0], coefficients: vec![] }
            .build()
            .is_err());
        assert!(NonlinearitySpec::Tabulated { u: vec![0.0, 1.0], f: vec![0.0, 1.0], tail_exponent: 6.0 }
            .build()
            .is_ok());
        assert!(NonlinearitySpec::Tabulated { u: vec![0.1, 1.0], f: vec![0.0, 1.0], tail_exponent: 6.0 }
            .build()
            .is_err());
        let nl = NonlinearitySpec::Power { p: 6.0, coefficient: 1.0 }.build().unwrap();
        assert_eq!(nl.primitive_bound(), Some((1.0 / 6.0, 0.0)));
    }

    #[test]
    fn tabulated_ar_exponent_from_knots() {
        // linear first segment: uf = 2F there, so μ collapses to 2
        let us: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let fs: Vec<f64> = us.iter().map(|u| u.powi(5)).collect();
        let t = Tabulated::new(us, fs, 6.0).unwrap();
        assert!((t.ar_exponent() - 2.0).abs() < 1e-12, "{}", t.ar_exponent());
        assert!(!check_hypotheses(&t, 1, &[]).ambrosetti_rabinowitz_ok);
        assert!((t.value(&[0.0], -1.0) + 1.0).abs() < 1e-12);
        assert!((t.value(&[0.0], 4.0) - 4f64.powi(5)).abs() < 1e-9);
    }
}
