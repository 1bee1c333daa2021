//! The Kirchhoff energy on `Y_m`, its gradient and Hessian, and cone distances.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::{EigenBasis, GalerkinVector};
use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

/// Coefficients of `−(a + b∫|∇u|²)Δu = f(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KirchhoffParams {
    pub a: f64,
    pub b: f64,
}

impl KirchhoffParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = KirchhoffParams { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::param("a", format!("must be positive, got {}", self.a)));
        }
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::param("b", format!("must be non-negative, got {}", self.b)));
        }
        Ok(())
    }

    /// `a + b‖u‖²` given `‖u‖²`.
    pub fn stiffness(&self, norm_sq: f64) -> f64 {
        self.a + self.b * norm_sq
    }
}

/// Which cone a distance refers to: `P_m` (nonnegative) or `−P_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cone {
    Positive,
    Negative,
}

/// How `dist(u, ±P_m)` is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceProxy {
    /// `‖Π_m u⁻ + τe₁‖` where `τ ≥ 0` is the smallest shift making
    /// `Π_m u⁺ + τe₁` nonnegative on the grid. Always an upper bound.
    #[default]
    Lifted,
    /// `‖Π_m u⁻‖`. Cheaper, but can undershoot the true distance.
    Truncation,
}

/// Cone-neighborhood radius `μ_m` and the estimated `δ_m` it sits under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeGeometry {
    pub mu_m: f64,
    pub delta_m: f64,
    pub proxy: DistanceProxy,
}

impl ConeGeometry {
    pub const MU_FRACTION: f64 = 0.4;

    pub fn from_delta(delta_m: f64, proxy: DistanceProxy) -> Result<Self> {
        if !(delta_m.is_finite() && delta_m > 0.0) {
            return Err(Error::Degenerate(format!(
                "cone separation estimate must be positive, got {delta_m}"
            )));
        }
        Ok(ConeGeometry {
            mu_m: Self::MU_FRACTION * delta_m,
            delta_m,
            proxy,
        })
    }
}

/// Plain truncation norms: `‖Π_m u^±‖` in `H¹₀` and `|u^±|₂` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartNorms {
    pub h1_plus: f64,
    pub h1_minus: f64,
    pub l2_plus: f64,
    pub l2_minus: f64,
}

/// Quantities shared by energy, gradient and `A` at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `‖u‖² = Σ λ_j c_j²`.
    pub norm_sq: f64,
    pub energy: f64,
    /// `⟨f(·, u), e_j⟩_{L²}`.
    pub load: Vec<f64>,
}

/// A discretized problem: basis, coefficients and nonlinearity.
#[derive(Debug, Clone)]
pub struct KirchhoffProblem {
    basis: Arc<EigenBasis>,
    params: KirchhoffParams,
    nl: Arc<dyn Nonlinearity>,
    lambda: Vec<f64>,
}

impl KirchhoffProblem {
    pub fn new(basis: Arc<EigenBasis>, params: KirchhoffParams, nl: Arc<dyn Nonlinearity>) -> Result<Self> {
        params.validate()?;
        let lambda = basis.eigenvalues().collect();
        Ok(KirchhoffProblem {
            basis,
            params,
            nl,
            lambda,
        })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn params(&self) -> KirchhoffParams {
        self.params
    }

    pub fn nonlinearity(&self) -> &Arc<dyn Nonlinearity> {
        &self.nl
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub(crate) fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Same problem on another basis.
    pub fn with_basis(&self, basis: Arc<EigenBasis>) -> Self {
        let lambda = basis.eigenvalues().collect();
        KirchhoffProblem {
            basis,
            params: self.params,
            nl: self.nl.clone(),
            lambda,
        }
    }

    pub(crate) fn check(&self, u: &GalerkinVector) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: self.dim(),
                actual: u.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn norm_sq(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.lambda).map(|(c, l)| l * c * c).sum()
    }

    /// Energy and, if requested, the load vector, in one grid pass.
    pub(crate) fn evaluate(&self, c: &[f64], with_load: bool) -> Evaluation {
        let grid = self.basis.synthesize(c);
        let points = self.basis.points();
        let weights = self.basis.weights();
        let mut integral_f = 0.0;
        let mut fvals = if with_load { vec![0.0; grid.len()] } else { Vec::new() };
        for (q, &u) in grid.iter().enumerate() {
            let x = &points[q];
            integral_f += weights[q] * self.nl.primitive(x, u);
            if with_load {
                fvals[q] = self.nl.value(x, u);
            }
        }
        let s = self.norm_sq(c);
        let energy = 0.5 * self.params.a * s + 0.25 * self.params.b * s * s - integral_f;
        let load = if with_load { self.basis.analyze(&fvals) } else { Vec::new() };
        Evaluation {
            norm_sq: s,
            energy,
            load,
        }
    }

    /// `Φ(u) = (a/2)‖u‖² + (b/4)‖u‖⁴ − ∫F(x, u)`.
    pub fn energy(&self, u: &GalerkinVector) -> Result<f64> {
        self.check(u)?;
        Ok(self.evaluate(u.coeffs(), false).energy)
    }

    pub(crate) fn gradient_from(&self, c: &[f64], ev: &Evaluation) -> Vec<f64> {
        let k = self.params.stiffness(ev.norm_sq);
        c.iter()
            .zip(&ev.load)
            .zip(&self.lambda)
            .map(|((c, g), l)| k * c - g / l)
            .collect()
    }

    /// `H¹₀`-Riesz representative of `Φ′_m(u)`.
    pub fn gradient(&self, u: &GalerkinVector) -> Result<GalerkinVector> {
        self.check(u)?;
        let ev = self.evaluate(u.coeffs(), true);
        Ok(GalerkinVector::new(self.gradient_from(u.coeffs(), &ev)))
    }

    pub fn energy_and_gradient(&self, u: &GalerkinVector) -> Result<(f64, GalerkinVector)> {
        self.check(u)?;
        let ev = self.evaluate(u.coeffs(), true);
        let g = self.gradient_from(u.coeffs(), &ev);
        Ok((ev.energy, GalerkinVector::new(g)))
    }

    /// `⟨Φ′(u), v⟩`.
    pub fn directional(&self, u: &GalerkinVector, v: &GalerkinVector) -> Result<f64> {
        self.check(v)?;
        let g = self.gradient(u)?;
        Ok(self.basis.h1_inner(&g, v))
    }

    /// Second derivative of `c ↦ Φ(Σ c_j e_j)` in coefficient coordinates.
    pub fn hessian(&self, u: &GalerkinVector) -> Result<DMatrix<f64>> {
        self.check(u)?;
        Ok(self.hessian_raw(u.coeffs()))
    }

    pub(crate) fn hessian_raw(&self, c: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        let grid = self.basis.synthesize(c);
        let points = self.basis.points();
        let w: Vec<f64> = grid
            .iter()
            .enumerate()
            .map(|(q, &u)| self.basis.weights()[q] * self.nl.derivative(&points[q], u))
            .collect();
        let s = self.norm_sq(c);
        let k = self.params.stiffness(s);
        let lc: Vec<f64> = c.iter().zip(&self.lambda).map(|(c, l)| c * l).collect();
        let mut h = DMatrix::zeros(m, m);
        let mut weighted = vec![0.0; w.len()];
        for i in 0..m {
            let ei = self.basis.mode_values(i);
            for (o, (e, wq)) in weighted.iter_mut().zip(ei.iter().zip(&w)) {
                *o = e * wq;
            }
            for j in i..m {
                let ej = self.basis.mode_values(j);
                let integral: f64 = weighted.iter().zip(ej).map(|(a, b)| a * b).sum();
                let mut v = 2.0 * self.params.b * lc[i] * lc[j] - integral;
                if i == j {
                    v += k * self.lambda[i];
                }
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    pub fn positive_part_norms(&self, u: &GalerkinVector) -> Result<PartNorms> {
        self.check(u)?;
        let grid = self.basis.synthesize(u.coeffs());
        let plus: Vec<f64> = grid.iter().map(|v| v.max(0.0)).collect();
        let minus: Vec<f64> = grid.iter().map(|v| (-v).max(0.0)).collect();
        let l2 = |g: &[f64]| self.basis.integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
        Ok(PartNorms {
            h1_plus: self.norm_sq(&self.basis.analyze(&plus)).sqrt(),
            h1_minus: self.norm_sq(&self.basis.analyze(&minus)).sqrt(),
            l2_plus: l2(&plus),
            l2_minus: l2(&minus),
        })
    }

    /// Upper bound on `dist(u, ±P_m)` in `H¹₀`, using the lifted proxy.
    pub fn cone_distance(&self, u: &GalerkinVector, cone: Cone) -> Result<f64> {
        self.cone_distance_with(u, cone, DistanceProxy::Lifted)
    }

    pub fn cone_distance_with(&self, u: &GalerkinVector, cone: Cone, proxy: DistanceProxy) -> Result<f64> {
        self.check(u)?;
        Ok(self.cone_distance_raw(u.coeffs(), cone, proxy))
    }

    pub(crate) fn cone_distance_raw(&self, c: &[f64], cone: Cone, proxy: DistanceProxy) -> f64 {
        let sign = match cone {
            Cone::Positive => 1.0,
            Cone::Negative => -1.0,
        };
        // dist(u, −P) = dist(−u, P)
        let grid: Vec<f64> = self.basis.synthesize(c).into_iter().map(|v| sign * v).collect();
        let minus: Vec<f64> = grid.iter().map(|v| (-v).max(0.0)).collect();
        let mut d = self.basis.analyze(&minus);
        if proxy == DistanceProxy::Lifted {
            let plus: Vec<f64> = grid.iter().map(|v| v.max(0.0)).collect();
            let proj = self.basis.synthesize(&self.basis.analyze(&plus));
            let e1 = self.basis.mode_values(0);
            let tau = proj
                .iter()
                .zip(e1)
                .map(|(p, e)| if *p < 0.0 { -p / e } else { 0.0 })
                .fold(0.0, f64::max);
            d[0] += tau;
        }
        self.norm_sq(&d).sqrt()
    }

    /// `min(dist(u, P_m), dist(u, −P_m))`.
    pub fn cone_separation(&self, u: &GalerkinVector, proxy: DistanceProxy) -> Result<f64> {
        self.check(u)?;
        Ok(self
            .cone_distance_raw(u.coeffs(), Cone::Positive, proxy)
            .min(self.cone_distance_raw(u.coeffs(), Cone::Negative, proxy)))
    }

    /// Minimum cone separation over a deterministic sample of the sphere
    /// `‖u‖ = r_k` in `Z_k^m = span{e_k, …, e_m}` (`k` counted from 1).
    ///
    /// The sample holds every axis vector `r_k e_j / ‖e_j‖` plus `samples`
    /// random directions. Being a minimum over finitely many points of an
    /// upper-bound proxy, it is an estimate, not a certified bound.
    pub fn estimate_delta_m(&self, k: usize, r_k: f64, samples: usize, seed: u64) -> Result<f64> {
        let m = self.dim();
        if k < 2 || m <= k + 2 {
            return Err(Error::param("k", format!("need 2 ≤ k and m > k + 2, got k = {k}, m = {m}")));
        }
        if !(r_k.is_finite() && r_k > 0.0) {
            return Err(Error::param("r_k", format!("must be positive, got {r_k}")));
        }
        let proxy = DistanceProxy::Lifted;
        let mut best = f64::INFINITY;
        for j in (k - 1)..m {
            let mut c = vec![0.0; m];
            c[j] = r_k / self.lambda[j].sqrt();
            best = best.min(self.separation_raw(&c, proxy));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let mut c = vec![0.0; m];
            for (cj, l) in c.iter_mut().zip(&self.lambda).skip(k - 1) {
                let g: f64 = StandardNormal.sample(&mut rng);
                *cj = g / l.sqrt();
            }
            let n = self.norm_sq(&c).sqrt();
            if n == 0.0 {
                continue;
            }
            c.iter_mut().for_each(|v| *v *= r_k / n);
            best = best.min(self.separation_raw(&c, proxy));
        }
        if !(best.is_finite() && best > 0.0) {
            return Err(Error::Degenerate(format!(
                "sampled sphere touches a cone (separation {best:e})"
            )));
        }
        Ok(best)
    }

    fn separation_raw(&self, c: &[f64], proxy: DistanceProxy) -> f64 {
        self.cone_distance_raw(c, Cone::Positive, proxy)
            .min(self.cone_distance_raw(c, Cone::Negative, proxy))
    }
}
