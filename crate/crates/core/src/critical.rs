//! Saddle-point computation: peak selection over `L ⊕ ℝ⁺v` with descent in
//! `v`, finished by Newton's method on the full Galerkin space.
//!
//! Plain descent along `−V` runs away from saddles, so sign-changing critical
//! points are reached as minimax points instead. With `L = span{e_1, …,
//! e_{k−1}}` and `v` on the unit sphere of `Z_k`, let `p(v)` maximize `Φ` over
//! `L ⊕ ℝ⁺v`. Descending `v ↦ Φ(p(v))` leads to a critical point whose
//! Morse index is generically `k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::GalerkinVector;
use crate::error::{Error, Result};
use crate::functional::KirchhoffProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxConfig {
    pub max_outer: usize,
    /// Hand over to Newton once `‖P_Z Φ′‖ ≤ switch_tolerance·(1 + ‖u‖)`.
    pub switch_tolerance: f64,
    /// Final acceptance: `‖V‖ ≤ tolerance·(1 + ‖u‖)`.
    pub tolerance: f64,
    pub max_newton: usize,
    pub sigma: f64,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig {
            max_outer: 400,
            switch_tolerance: 1e-3,
            tolerance: 1e-9,
            max_newton: 40,
            sigma: 1e-4,
        }
    }
}

impl MinimaxConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("search.switch_tolerance", self.switch_tolerance),
            ("search.tolerance", self.tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::param("search.sigma", format!("must lie in (0, 1), got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Outcome of a minimax run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub u: GalerkinVector,
    pub energy: f64,
    pub residual_norm: f64,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
}

struct Peak {
    w: Vec<f64>,
    t: f64,
    coeffs: Vec<f64>,
    energy: f64,
}

/// Energy, gradient and Hessian of `Φ` restricted to `c + span(cols)`, taken at `c`.
fn restricted(problem: &KirchhoffProblem, c: &[f64], cols: &[Vec<f64>]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let basis = problem.basis();
    let nl = problem.nonlinearity();
    let lambda = problem.lambda();
    let params = problem.params();
    let grid = basis.synthesize(c);
    let points = basis.points();
    let weights = basis.weights();
    let mut fvals = vec![0.0; grid.len()];
    let mut dvals = vec![0.0; grid.len()];
    let mut integral_f = 0.0;
    for (q, &u) in grid.iter().enumerate() {
        let x = &points[q];
        integral_f += weights[q] * nl.primitive(x, u);
        fvals[q] = nl.value(x, u);
        dvals[q] = weights[q] * nl.derivative(x, u);
    }
    let s = problem.norm_sq(c);
    let ks = params.stiffness(s);
    let energy = 0.5 * params.a * s + 0.25 * params.b * s * s - integral_f;
    let load = basis.analyze(&fvals);
    let euclid: Vec<f64> = (0..c.len()).map(|j| ks * lambda[j] * c[j] - load[j]).collect();
    let lc: Vec<f64> = c.iter().zip(lambda).map(|(c, l)| c * l).collect();
    let n = cols.len();
    let col_grids: Vec<Vec<f64>> = cols.iter().map(|q| basis.synthesize(q)).collect();
    let proj: Vec<f64> = cols.iter().map(|q| q.iter().zip(&lc).map(|(a, b)| a * b).sum()).collect();
    let grad = DVector::from_iterator(n, cols.iter().map(|q| q.iter().zip(&euclid).map(|(a, b)| a * b).sum()));
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let stiff: f64 = cols[i]
                .iter()
                .zip(&cols[j])
                .zip(lambda)
                .map(|((a, b), l)| a * b * l)
                .sum();
            let curv: f64 = col_grids[i]
                .iter()
                .zip(&col_grids[j])
                .zip(&dvals)
                .map(|((a, b), d)| a * b * d)
                .sum();
            let v = ks * stiff + 2.0 * params.b * proj[i] * proj[j] - curv;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (energy, grad, hess)
}

struct Subspace {
    /// `L` basis `e_a/‖e_a‖`, `a < k − 1`.
    cols: Vec<Vec<f64>>,
}

impl Subspace {
    fn new(problem: &KirchhoffProblem, k: usize) -> Self {
        let m = problem.dim();
        let cols = (0..k - 1)
            .map(|a| {
                let mut c = vec![0.0; m];
                c[a] = 1.0 / problem.lambda()[a].sqrt();
                c
            })
            .collect();
        Subspace { cols }
    }

    fn compose(&self, w: &[f64], t: f64, v: &[f64]) -> Vec<f64> {
        let mut c: Vec<f64> = v.iter().map(|x| t * x).collect();
        for (wa, col) in w.iter().zip(&self.cols) {
            for (ci, qi) in c.iter_mut().zip(col) {
                *ci += wa * qi;
            }
        }
        c
    }
}

/// Largest `t` where `Φ(tv)` stops increasing.
fn ray_maximum(problem: &KirchhoffProblem, v: &[f64]) -> Result<f64> {
    let slope = |t: f64| -> f64 {
        let c: Vec<f64> = v.iter().map(|x| t * x).collect();
        let ev = problem.evaluate(&c, true);
        let g = problem.gradient_from(&c, &ev);
        g.iter().zip(v).zip(problem.lambda()).map(|((g, v), l)| g * v * l).sum()
    };
    let mut hi = 1.0;
    let mut guard = 0;
    while slope(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Degenerate("energy grows along the whole ray".into()));
        }
    }
    let mut lo = hi / 2.0;
    while slope(lo) <= 0.0 {
        lo /= 2.0;
        if lo < 1e-300 {
            return Err(Error::Degenerate("energy decreases from the origin along the ray".into()));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn peak_select(
    problem: &KirchhoffProblem,
    sub: &Subspace,
    v: &[f64],
    warm: Option<(&[f64], f64)>,
) -> Result<Peak> {
    let k1 = sub.cols.len();
    let (mut w, mut t) = match warm {
        Some((w, t)) => (w.to_vec(), t),
        None => (vec![0.0; k1], ray_maximum(problem, v)?),
    };
    let mut cols = sub.cols.clone();
    cols.push(v.to_vec());
    let mut coeffs = sub.compose(&w, t, v);
    let (mut energy, mut grad, mut hess) = restricted(problem, &coeffs, &cols);
    for _ in 0..200 {
        let scale = 1.0 + problem.norm_sq(&coeffs).sqrt();
        if grad.norm() <= 1e-12 * scale {
            break;
        }
        let neg = -&hess;
        let step = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => &grad / hess.norm().max(1.0),
        };
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let w_try: Vec<f64> = (0..k1).map(|a| w[a] + alpha * step[a]).collect();
            let t_try = t + alpha * step[k1];
            if t_try > 0.0 {
                let c_try = sub.compose(&w_try, t_try, v);
                let e_try = problem.evaluate(&c_try, false).energy;
                if e_try >= energy + 1e-4 * alpha * slope {
                    w = w_try;
                    t = t_try;
                    coeffs = c_try;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        let r = restricted(problem, &coeffs, &cols);
        energy = r.0;
        grad = r.1;
        hess = r.2;
    }
    if !energy.is_finite() {
        return Err(Error::NonFinite("peak selection energy".into()));
    }
    Ok(Peak { w, t, coeffs, energy })
}

fn residual_norm(problem: &KirchhoffProblem, c: &[f64]) -> f64 {
    let ev = problem.evaluate(c, true);
    let k = problem.params().stiffness(ev.norm_sq);
    let g = problem.gradient_from(c, &ev);
    problem.norm_sq(&g).sqrt() / k
}

/// Newton's method on `∇Φ = 0` in `Y_m`, damped on `‖V‖`. Returns the
/// iterate, `‖V‖` and the iteration count.
pub fn newton_polish(
    problem: &KirchhoffProblem,
    u: &GalerkinVector,
    tolerance: f64,
    max_iter: usize,
) -> Result<(GalerkinVector, f64, usize)> {
    problem.check(u)?;
    let mut c = u.coeffs().to_vec();
    let mut res = residual_norm(problem, &c);
    for it in 0..=max_iter {
        let norm = problem.norm_sq(&c).sqrt();
        if res <= tolerance * (1.0 + norm) {
            return Ok((GalerkinVector::new(c), res, it));
        }
        if it == max_iter {
            break;
        }
        let ev = problem.evaluate(&c, true);
        let ks = problem.params().stiffness(ev.norm_sq);
        let euclid: Vec<f64> = (0..c.len())
            .map(|j| ks * problem.lambda()[j] * c[j] - ev.load[j])
            .collect();
        let h = problem.hessian_raw(&c);
        let rhs = -DVector::from_vec(euclid);
        let delta = match h.clone().lu().solve(&rhs) {
            Some(d) if d.iter().all(|x| x.is_finite()) => d,
            _ => h
                .svd(true, true)
                .solve(&rhs, 1e-13)
                .map_err(|e| Error::NoConvergence(format!("Newton system: {e}")))?,
        };
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = c.iter().zip(delta.iter()).map(|(c, d)| c + alpha * d).collect();
            let r = residual_norm(problem, &trial);
            if r.is_finite() && r < (1.0 - 1e-4 * alpha) * res {
                c = trial;
                res = r;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                return Err(Error::NoConvergence(format!(
                    "Newton line search stalled at residual {res:e}"
                )));
            }
        }
    }
    Err(Error::NoConvergence(format!("Newton did not reach tolerance (residual {res:e})")))
}

/// Minimax search for a critical point, starting from direction `v0` in
/// `Z_k = span{e_k, …, e_m}` (`k` counted from 1).
pub fn minimax(
    problem: &KirchhoffProblem,
    k: usize,
    v0: &GalerkinVector,
    config: &MinimaxConfig,
) -> Result<CriticalPoint> {
    config.validate()?;
    problem.check(v0)?;
    let m = problem.dim();
    if k < 1 || k > m {
        return Err(Error::param("k", format!("need 1 ≤ k ≤ m = {m}, got {k}")));
    }
    let k1 = k - 1;
    let sub = Subspace::new(problem, k);
    let normalize = |c: &mut Vec<f64>| -> Result<()> {
        c[..k1].iter_mut().for_each(|x| *x = 0.0);
        let n = problem.norm_sq(c).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate("search direction vanished in Z_k".into()));
        }
        c.iter_mut().for_each(|x| *x /= n);
        Ok(())
    };
    let mut v = v0.coeffs().to_vec();
    normalize(&mut v)?;
    let mut peak = peak_select(problem, &sub, &v, None)?;
    let mut s = 1.0 / peak.t;
    let mut switch = config.switch_tolerance;
    let mut newton_total = 0;
    let mut outer = 0;
    let fail = |peak: &Peak, outer: usize, newton: usize| -> CriticalPoint {
        let res = residual_norm(problem, &peak.coeffs);
        CriticalPoint {
            u: GalerkinVector::new(peak.coeffs.clone()),
            energy: peak.energy,
            residual_norm: res,
            outer_iterations: outer,
            newton_iterations: newton,
            converged: false,
        }
    };
    while outer < config.max_outer {
        let ev = problem.evaluate(&peak.coeffs, true);
        let mut g = problem.gradient_from(&peak.coeffs, &ev);
        g[..k1].iter_mut().for_each(|x| *x = 0.0);
        let gz = problem.norm_sq(&g).sqrt();
        let norm = ev.norm_sq.sqrt();
        if gz <= switch * (1.0 + norm) {
            match newton_polish(
                problem,
                &GalerkinVector::new(peak.coeffs.clone()),
                config.tolerance,
                config.max_newton,
            ) {
                Ok((u, res, its)) => {
                    let energy = problem.evaluate(u.coeffs(), false).energy;
                    return Ok(CriticalPoint {
                        u,
                        energy,
                        residual_norm: res,
                        outer_iterations: outer,
                        newton_iterations: newton_total + its,
                        converged: true,
                    });
                }
                Err(_) => {
                    newton_total += config.max_newton;
                    switch *= 0.01;
                    if switch < 1e-12 {
                        return Ok(fail(&peak, outer, newton_total));
                    }
                    continue;
                }
            }
        }
        outer += 1;
        let mut accepted = false;
        while s * peak.t > 1e-14 {
            let mut v_try: Vec<f64> = v.iter().zip(&g).map(|(v, g)| v - s * g).collect();
            normalize(&mut v_try)?;
            let cand = peak_select(problem, &sub, &v_try, Some((&peak.w, peak.t)))?;
            if cand.energy <= peak.energy - config.sigma * peak.t * s * gz * gz {
                v = v_try;
                peak = cand;
                s *= 2.0;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            // Stalled: one Newton attempt from here, then give up.
            return Ok(
                match newton_polish(
                    problem,
                    &GalerkinVector::new(peak.coeffs.clone()),
                    config.tolerance,
                    config.max_newton,
                ) {
                    Ok((u, res, its)) => CriticalPoint {
                        energy: problem.evaluate(u.coeffs(), false).energy,
                        u,
                        residual_norm: res,
                        outer_iterations: outer,
                        newton_iterations: newton_total + its,
                        converged: true,
                    },
                    Err(_) => fail(&peak, outer, newton_total + config.max_newton),
                },
            );
        }
    }
    Ok(fail(&peak, outer, newton_total))
}
