//! The operator `A`, the residual `V = u − Au` and the descending flow along `−V`.

use serde::{Deserialize, Serialize};

use crate::basis::GalerkinVector;
use crate::error::{Error, Result};
use crate::functional::{Cone, DistanceProxy, Evaluation, KirchhoffProblem};

/// How each Euler step picks `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    /// Always `h`, no acceptance test.
    Fixed { h: f64 },
    /// Try `h` (at most `h_max`), halve until
    /// `Φ(u − hV) ≤ Φ(u) − σ·h·a‖V‖²`. After a success the next trial
    /// step doubles.
    Armijo { h_max: f64, sigma: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Armijo {
            h_max: 1.0,
            sigma: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub step: StepRule,
    pub max_steps: usize,
    /// Converged once `‖V‖ ≤ tolerance·(1 + ‖u‖)`.
    pub tolerance: f64,
    /// Record `dist(u, ±P_m)` at every recorded step.
    pub track_cones: bool,
    /// Keep every `record_every`-th iterate; the first and last are always kept.
    pub record_every: usize,
    /// Give up once `‖u‖` exceeds this.
    pub max_norm: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step: StepRule::default(),
            max_steps: 100_000,
            tolerance: 1e-9,
            track_cones: false,
            record_every: 1,
            max_norm: 1e8,
        }
    }
}

impl FlowConfig {
    pub const MIN_STEP: f64 = 1e-14;

    pub fn validate(&self) -> Result<()> {
        let h = match self.step {
            StepRule::Fixed { h } => h,
            StepRule::Armijo { h_max, sigma } => {
                if !(sigma > 0.0 && sigma < 1.0) {
                    return Err(Error::param("flow.sigma", format!("must lie in (0, 1), got {sigma}")));
                }
                h_max
            }
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::param("flow.h", format!("must be positive, got {h}")));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::param("flow.tolerance", format!("must be positive, got {}", self.tolerance)));
        }
        if self.record_every == 0 {
            return Err(Error::param("flow.record_every", "must be at least 1"));
        }
        Ok(())
    }

    fn initial_step(&self) -> f64 {
        match self.step {
            StepRule::Fixed { h } => h,
            StepRule::Armijo { h_max, .. } => h_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AlreadyCritical,
    Converged,
    MaxSteps,
    StepUnderflow,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub step_index: usize,
    pub iterate: GalerkinVector,
    pub energy: f64,
    pub residual_norm: f64,
    /// `(dist(u, P_m), dist(u, −P_m))` when tracking is on.
    pub cone_distances: Option<(f64, f64)>,
    /// Step accepted to leave this iterate; `0` for the last record.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    pub termination: Termination,
    pub steps: usize,
}

impl FlowTrace {
    pub fn last(&self) -> &FlowRecord {
        self.records.last().expect("trace is never empty")
    }

    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::Converged | Termination::AlreadyCritical)
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub iterate: GalerkinVector,
    pub energy: f64,
    pub step: f64,
}

/// Max violations of the `A`-lemma inequalities over a sample; `≤ 0` means
/// no violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub samples: usize,
    /// `max (a‖V‖² − ⟨Φ′(u), V⟩) / (1 + ⟨Φ′(u), V⟩)`.
    pub descent_violation: f64,
    /// `max |⟨Φ′, V⟩/(a‖V‖²) − (a + b‖u‖²)/a|`.
    pub factor_deviation: f64,
    /// `max (‖Φ′(u)‖ − (a + b)(1 + ‖u‖²)‖V‖) / (1 + ‖Φ′(u)‖)`.
    pub gradient_bound_violation: f64,
    /// Samples within `μ` of a cone.
    pub cone_samples: usize,
    /// `max dist(Au, ±P)/dist(u, ±P)` over cone samples with positive distance.
    pub max_contraction_ratio: f64,
    /// `max (dist(Au, ±P) − ½ dist(u, ±P))` over cone samples.
    pub contraction_violation: f64,
}

impl LemmaReport {
    /// Absolute floor below which cone distances count as zero.
    pub const DISTANCE_FLOOR: f64 = 1e-10;

    pub fn holds(&self) -> bool {
        self.descent_violation <= 1e-12
            && self.gradient_bound_violation <= 1e-12
            && self.contraction_violation <= Self::DISTANCE_FLOOR
    }
}

impl KirchhoffProblem {
    pub(crate) fn apply_a_from(&self, ev: &Evaluation) -> Vec<f64> {
        let k = self.params().stiffness(ev.norm_sq);
        ev.load.iter().zip(self.lambda()).map(|(g, l)| g / (k * l)).collect()
    }

    /// `Au`: the solution of `−(a + b‖u‖²)Δv = f(x, u)` in `Y_m`.
    pub fn apply_a(&self, u: &GalerkinVector) -> Result<GalerkinVector> {
        self.check(u)?;
        let ev = self.evaluate(u.coeffs(), true);
        Ok(GalerkinVector::new(self.apply_a_from(&ev)))
    }

    /// `V = u − Au` and `‖V‖`.
    pub fn residual(&self, u: &GalerkinVector) -> Result<(GalerkinVector, f64)> {
        self.check(u)?;
        let ev = self.evaluate(u.coeffs(), true);
        let v = self.residual_from(u.coeffs(), &ev);
        let n = self.norm_sq(&v).sqrt();
        Ok((GalerkinVector::new(v), n))
    }

    fn residual_from(&self, c: &[f64], ev: &Evaluation) -> Vec<f64> {
        self.apply_a_from(ev).iter().zip(c).map(|(a, c)| c - a).collect()
    }

    /// One Euler step `u − hV(u)` under the configured step rule. `h_trial`
    /// is the first step tried.
    pub fn flow_step(&self, u: &GalerkinVector, config: &FlowConfig, h_trial: f64) -> Result<StepOutcome> {
        self.check(u)?;
        let ev = self.evaluate(u.coeffs(), true);
        let v = self.residual_from(u.coeffs(), &ev);
        self.step_along(u.coeffs(), &ev, &v, config, h_trial, 0)
    }

    fn step_along(
        &self,
        c: &[f64],
        ev: &Evaluation,
        v: &[f64],
        config: &FlowConfig,
        h_trial: f64,
        steps: usize,
    ) -> Result<StepOutcome> {
        let v_sq = self.norm_sq(v);
        let trial = |h: f64| -> Vec<f64> { c.iter().zip(v).map(|(c, v)| c - h * v).collect() };
        match config.step {
            StepRule::Fixed { h } => {
                let next = trial(h);
                let energy = self.evaluate(&next, false).energy;
                Ok(StepOutcome {
                    iterate: GalerkinVector::new(next),
                    energy,
                    step: h,
                })
            }
            StepRule::Armijo { sigma, .. } => {
                let a = self.params().a;
                let mut h = h_trial;
                while h >= FlowConfig::MIN_STEP {
                    let next = trial(h);
                    let energy = self.evaluate(&next, false).energy;
                    if energy.is_finite() && energy <= ev.energy - sigma * h * a * v_sq {
                        return Ok(StepOutcome {
                            iterate: GalerkinVector::new(next),
                            energy,
                            step: h,
                        });
                    }
                    h *= 0.5;
                }
                Err(Error::StepUnderflow { steps, step: h })
            }
        }
    }

    /// Integrates the descending flow from `u0`.
    pub fn run_flow(&self, u0: &GalerkinVector, config: &FlowConfig) -> Result<FlowTrace> {
        config.validate()?;
        self.check(u0)?;
        let mut c = u0.coeffs().to_vec();
        let mut records = Vec::new();
        let mut h = config.initial_step();
        let mut steps = 0usize;
        let termination = loop {
            let ev = self.evaluate(&c, true);
            if !ev.energy.is_finite() {
                return Err(Error::NonFinite(format!("energy after {steps} flow steps")));
            }
            let v = self.residual_from(&c, &ev);
            let v_norm = self.norm_sq(&v).sqrt();
            let u_norm = ev.norm_sq.sqrt();
            let record = |step: f64| FlowRecord {
                step_index: steps,
                iterate: GalerkinVector::new(c.clone()),
                energy: ev.energy,
                residual_norm: v_norm,
                cone_distances: config.track_cones.then(|| {
                    (
                        self.cone_distance_raw(&c, Cone::Positive, DistanceProxy::Lifted),
                        self.cone_distance_raw(&c, Cone::Negative, DistanceProxy::Lifted),
                    )
                }),
                step,
            };
            if v_norm <= config.tolerance * (1.0 + u_norm) {
                records.push(record(0.0));
                break if steps == 0 {
                    Termination::AlreadyCritical
                } else {
                    Termination::Converged
                };
            }
            if steps >= config.max_steps {
                records.push(record(0.0));
                break Termination::MaxSteps;
            }
            if u_norm > config.max_norm {
                records.push(record(0.0));
                break Termination::Diverged;
            }
            match self.step_along(&c, &ev, &v, config, h, steps) {
                Ok(out) => {
                    if steps.is_multiple_of(config.record_every) {
                        records.push(record(out.step));
                    }
                    if let StepRule::Armijo { h_max, .. } = config.step {
                        h = (2.0 * out.step).min(h_max);
                    }
                    c = out.iterate.into_coeffs();
                    steps += 1;
                }
                Err(Error::StepUnderflow { .. }) => {
                    records.push(record(0.0));
                    break Termination::StepUnderflow;
                }
                Err(e) => return Err(e),
            }
        };
        Ok(FlowTrace {
            records,
            termination,
            steps,
        })
    }

    /// Samples the `A`-lemma inequalities. Cone contraction is checked only
    /// for samples within `mu` of `P_m` or `−P_m`.
    pub fn check_a_lemma(&self, samples: &[GalerkinVector], mu: f64) -> Result<LemmaReport> {
        if samples.is_empty() {
            return Err(Error::param("samples", "need at least one sample"));
        }
        let p = self.params();
        let mut report = LemmaReport {
            samples: samples.len(),
            descent_violation: f64::NEG_INFINITY,
            factor_deviation: 0.0,
            gradient_bound_violation: f64::NEG_INFINITY,
            cone_samples: 0,
            max_contraction_ratio: 0.0,
            contraction_violation: f64::NEG_INFINITY,
        };
        for u in samples {
            self.check(u)?;
            let c = u.coeffs();
            let ev = self.evaluate(c, true);
            let v = self.residual_from(c, &ev);
            let g = self.gradient_from(c, &ev);
            let v_sq = self.norm_sq(&v);
            let g_dot_v: f64 = g.iter().zip(&v).zip(self.lambda()).map(|((g, v), l)| l * g * v).sum();
            report.descent_violation = report
                .descent_violation
                .max((p.a * v_sq - g_dot_v) / (1.0 + g_dot_v.abs()));
            if v_sq > 0.0 {
                let factor = g_dot_v / (p.a * v_sq);
                let expected = p.stiffness(ev.norm_sq) / p.a;
                report.factor_deviation = report.factor_deviation.max((factor - expected).abs() / expected);
            }
            let g_norm = self.norm_sq(&g).sqrt();
            let bound = (p.a + p.b) * (1.0 + ev.norm_sq) * v_sq.sqrt();
            report.gradient_bound_violation = report
                .gradient_bound_violation
                .max((g_norm - bound) / (1.0 + g_norm));

            let au = self.apply_a_from(&ev);
            let mut near = false;
            for cone in [Cone::Positive, Cone::Negative] {
                let d = self.cone_distance_raw(c, cone, DistanceProxy::Lifted);
                if d < mu {
                    near = true;
                    let da = self.cone_distance_raw(&au, cone, DistanceProxy::Lifted);
                    report.contraction_violation = report.contraction_violation.max(da - 0.5 * d);
                    if d > LemmaReport::DISTANCE_FLOOR {
                        report.max_contraction_ratio = report.max_contraction_ratio.max(da / d);
                    }
                }
            }
            if near {
                report.cone_samples += 1;
            }
        }
        if report.cone_samples == 0 {
            report.contraction_violation = 0.0;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Domain, EigenBasis};
    use crate::functional::KirchhoffParams;
    use crate::nonlinearity::{Linear, Nonlinearity, Power};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn problem(m: usize, a: f64, b: f64, nl: Arc<dyn Nonlinearity>) -> KirchhoffProblem {
        let basis = EigenBasis::with_exponent(Domain::interval(PI).unwrap(), m, 6.0).unwrap();
        KirchhoffProblem::new(Arc::new(basis), KirchhoffParams::new(a, b).unwrap(), nl).unwrap()
    }

    fn random_u(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> GalerkinVector {
        GalerkinVector::new(
            (0..m)
                .map(|j| scale * rng.gen_range(-1.0..1.0) / (j as f64 + 1.0))
                .collect(),
        )
    }

    #[test]
    fn a_of_zero_and_linear_single_mode() {
        let pr = problem(6, 1.0, 1.0, Arc::new(Power::new(6.0)));
        let a0 = pr.apply_a(&GalerkinVector::zeros(6)).unwrap();
        assert!(a0.coeffs().iter().all(|v| *v == 0.0));

        let pr = problem(6, 2.0, 0.0, Arc::new(Linear { slope: 1.0 }));
        for j in 0..6 {
            let e = GalerkinVector::unit(6, j);
            let au = pr.apply_a(&e).unwrap();
            let lam = pr.basis().eigenvalue(j);
            for (i, v) in au.coeffs().iter().enumerate() {
                let expected = if i == j { 1.0 / (2.0 * lam) } else { 0.0 };
                assert!((v - expected).abs() < 1e-13, "mode {j}, entry {i}: {v}");
            }
        }
    }

    #[test]
    fn gradient_residual_identity() {
        let pr = problem(12, 1.3, 0.8, Arc::new(Power::new(6.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let u = random_u(&mut rng, 12, 2.0);
            let g = pr.gradient(&u).unwrap();
            let (v, vn) = pr.residual(&u).unwrap();
            let k = pr.params().stiffness(pr.basis().h1_norm_sq(&u));
            let diff = &g - &v.scaled(k);
            let gn = pr.basis().h1_norm(&g);
            assert!(pr.basis().h1_norm(&diff) <= 1e-10 * (1.0 + gn));
            let gv = pr.basis().h1_inner(&g, &v);
            assert!(gv >= pr.params().a * vn * vn * (1.0 - 1e-12));
        }
    }

    #[test]
    fn fixed_point_is_already_critical() {
        let pr = problem(6, 1.0, 0.0, Arc::new(Power::new(6.0)));
        let trace = pr.run_flow(&GalerkinVector::zeros(6), &FlowConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::AlreadyCritical);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.steps, 0);
    }

    #[test]
    fn quadratic_case_decays_geometrically() {
        let pr = problem(6, 1.0, 0.0, Arc::new(Linear { slope: 0.0 }));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_u(&mut rng, 6, 1.0);
        let cfg = FlowConfig {
            step: StepRule::Fixed { h: 0.25 },
            max_steps: 10,
            ..FlowConfig::default()
        };
        let trace = pr.run_flow(&u, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::MaxSteps);
        let e0 = trace.records[0].energy;
        for (n, r) in trace.records.iter().enumerate() {
            let expected = e0 * 0.75f64.powi(2 * n as i32);
            assert!((r.energy - expected).abs() <= 1e-14 * e0);
        }
    }

    #[test]
    fn single_armijo_step_decreases_energy() {
        let pr = problem(16, 1.0, 0.0, Arc::new(Power::new(6.0)));
        let u = GalerkinVector::unit(16, 0).scaled(2.0);
        let cfg = FlowConfig::default();
        let out = pr.flow_step(&u, &cfg, 1.0).unwrap();
        let e0 = pr.energy(&u).unwrap();
        let e1 = pr.energy(&out.iterate).unwrap();
        assert_eq!(e1, out.energy);
        let (_, vn) = pr.residual(&u).unwrap();
        assert!(e1 <= e0 - 1e-4 * out.step * vn * vn);
    }

    #[test]
    fn flow_is_odd_and_monotone() {
        let pr = problem(10, 1.0, 1.0, Arc::new(Power::new(6.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_u(&mut rng, 10, 0.8);
        let cfg = FlowConfig {
            max_steps: 200,
            ..FlowConfig::default()
        };
        let t1 = pr.run_flow(&u, &cfg).unwrap();
        let t2 = pr.run_flow(&(-&u), &cfg).unwrap();
        assert_eq!(t1.records.len(), t2.records.len());
        for (a, b) in t1.records.iter().zip(&t2.records) {
            assert_eq!(a.iterate, -&b.iterate);
            assert_eq!(a.energy, b.energy);
        }
        for w in t1.records.windows(2) {
            assert!(w[1].energy < w[0].energy);
        }
    }

    #[test]
    fn small_data_flows_to_zero() {
        let pr = problem(8, 1.0, 1.0, Arc::new(Power::new(6.0)));
        let u = GalerkinVector::unit(8, 0).scaled(0.5);
        let trace = pr.run_flow(&u, &FlowConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        assert!(pr.basis().h1_norm(&trace.last().iterate) < 1e-8);
    }

    #[test]
    fn lemma_report_on_random_samples() {
        let pr = problem(10, 1.0, 1.0, Arc::new(Power::new(6.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let samples: Vec<GalerkinVector> = (0..100)
            .map(|_| {
                let u = random_u(&mut rng, 10, 1.0);
                let r = rng.gen_range(0.0..5.0);
                let n = pr.basis().h1_norm(&u);
                u.scaled(r / n)
            })
            .collect();
        let rep = pr.check_a_lemma(&samples, 0.0).unwrap();
        assert!(rep.descent_violation <= 0.0);
        assert!(rep.gradient_bound_violation <= 0.0);
        assert!(rep.factor_deviation < 1e-10);
        assert!(pr.check_a_lemma(&[], 1.0).is_err());
    }

    #[test]
    fn contraction_near_positive_cone() {
        let pr = problem(16, 1.0, 1.0, Arc::new(Power::new(6.0)));
        let mut c = vec![0.0; 16];
        c[0] = 0.3;
        c[1] = 0.003;
        let u = GalerkinVector::new(c);
        let rep = pr.check_a_lemma(&[u], 1.0).unwrap();
        assert_eq!(rep.cone_samples, 1);
        assert!(rep.contraction_violation <= LemmaReport::DISTANCE_FLOOR, "{rep:?}");
    }

    #[test]
    fn config_validation() {
        let bad = FlowConfig {
            tolerance: 0.0,
            ..FlowConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FlowConfig {
            step: StepRule::Fixed { h: -1.0 },
            ..FlowConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
