//! Multi-start search for sign-changing solutions on successive shells.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{EigenBasis, GalerkinVector};
use crate::critical::{minimax, newton_polish, MinimaxConfig};
use crate::error::{Error, Result};
use crate::functional::{Cone, ConeGeometry, DistanceProxy, KirchhoffParams, KirchhoffProblem};
use crate::nonlinearity::Nonlinearity;

/// Radii and levels attached to shell `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FountainGeometry {
    pub k: usize,
    pub m: usize,
    pub beta_k: f64,
    pub r_k: f64,
    /// Lower bound of `Φ` on `N_k` implied by `β_k`.
    pub b_k: f64,
    /// Radius beyond which `Φ ≤ 0` on every sampled direction of `Y_k`.
    pub rho_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub seeds_per_shell: usize,
    pub rng_seed: u64,
    pub minimax: MinimaxConfig,
    /// Random directions used for `δ_m` and `ρ_k`.
    pub geometry_samples: usize,
    /// Random starts for `β_k` on top of the coordinate starts.
    pub beta_starts: usize,
    pub beta_iterations: usize,
    /// Sign tolerance is this times `r_k`.
    pub sign_tolerance_factor: f64,
    /// Dedup radius is this times `1 + ‖u‖`.
    pub dedup_tolerance: f64,
    /// Points per axis for counting nodal domains.
    pub nodal_grid: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seeds_per_shell: 32,
            rng_seed: 0x5eed,
            minimax: MinimaxConfig::default(),
            geometry_samples: 256,
            beta_starts: 4,
            beta_iterations: 400,
            sign_tolerance_factor: 1e-6,
            dedup_tolerance: 1e-6,
            nodal_grid: 1024,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.minimax.validate()?;
        if self.nodal_grid < 3 {
            return Err(Error::param("search.nodal_grid", "need at least 3 points per axis"));
        }
        for (name, v) in [
            ("search.sign_tolerance_factor", self.sign_tolerance_factor),
            ("search.dedup_tolerance", self.dedup_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// One distinct critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub coefficients: GalerkinVector,
    pub energy: f64,
    pub residual: f64,
    pub norm: f64,
    pub h1_plus: f64,
    pub h1_minus: f64,
    pub l2_plus: f64,
    pub l2_minus: f64,
    pub sign_changes: usize,
    pub sign_changing: bool,
    /// Shell where it was first found.
    pub k: usize,
    pub m: usize,
    /// Seeds (over all shells) that converged to it, up to sign.
    pub hits: usize,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
}

impl SolutionRecord {
    pub fn min_part(&self) -> f64 {
        self.h1_plus.min(self.h1_minus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellReport {
    pub k: usize,
    pub geometry: FountainGeometry,
    pub cone: ConeGeometry,
    pub seeds: usize,
    pub converged: usize,
    pub failed: usize,
    /// Distinct records first found on this shell.
    pub new_records: usize,
    /// Lowest energy of a sign-changing record first found here.
    pub level: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub shells: Vec<ShellReport>,
    /// Sorted by energy.
    pub records: Vec<SolutionRecord>,
}

impl SearchOutcome {
    /// Energies of distinct sign-changing records in order of discovery
    /// (shell, then energy).
    pub fn found_levels(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .records
            .iter()
            .filter(|r| r.sign_changing)
            .map(|r| (r.k, r.energy))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

/// `(c₅, c₆)` with `F(x, u) ≤ c₅|u|^p + c₆`, exact when the nonlinearity
/// knows them and otherwise fitted on samples.
pub fn primitive_constants(nl: &dyn Nonlinearity, xs: &[Vec<f64>]) -> (f64, f64) {
    if let Some(c) = nl.primitive_bound() {
        return c;
    }
    let p = nl.growth_exponent();
    let default_x = [vec![0.0]];
    let xs = if xs.is_empty() { &default_x[..] } else { xs };
    let amps: Vec<f64> = (0..=48).map(|i| 10f64.powf(-3.0 + i as f64 * 0.125)).collect();
    let mut c5 = 0.0f64;
    for x in xs {
        for &u in amps.iter().filter(|u| **u >= 1.0) {
            for s in [u, -u] {
                c5 = c5.max(nl.primitive(x, s) / u.powf(p));
            }
        }
    }
    let mut c6 = 0.0f64;
    for x in xs {
        for &u in &amps {
            for s in [u, -u] {
                c6 = c6.max(nl.primitive(x, s) - c5 * u.powf(p));
            }
        }
    }
    (c5, c6)
}

/// `(r_k, b_k)` with `r_k = (c₅pβ^p/a)^{1/(2−p)}` and
/// `b_k = a(1/2 − 1/p)r_k² − c₆`.
pub fn compute_r_k(beta_k: f64, params: KirchhoffParams, p: f64, c5: f64, c6: f64) -> Result<(f64, f64)> {
    params.validate()?;
    if !(p.is_finite() && p > 2.0) {
        return Err(Error::param("p", format!("must exceed 2, got {p}")));
    }
    if !(beta_k.is_finite() && beta_k > 0.0) {
        return Err(Error::param("beta_k", format!("must be positive, got {beta_k}")));
    }
    if !(c5.is_finite() && c5 > 0.0) {
        return Err(Error::param("c5", format!("must be positive, got {c5}")));
    }
    let base = c5 * p * beta_k.powf(p) / params.a;
    let r = base.powf(1.0 / (2.0 - p));
    let b = params.a * (0.5 - 1.0 / p) * base.powf(2.0 / (2.0 - p)) - c6;
    Ok((r, b))
}

/// One ascent run for `sup |v|_p` on the unit sphere of `Z_k`; returns the
/// maximizer and `|v|_p`.
fn beta_ascent(basis: &EigenBasis, lambda: &[f64], k: usize, p: f64, start: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let k1 = k - 1;
    let h1 = |c: &[f64]| c.iter().zip(lambda).map(|(c, l)| l * c * c).sum::<f64>().sqrt();
    let mut v = start.to_vec();
    v[..k1].iter_mut().for_each(|x| *x = 0.0);
    let n = h1(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let mut grid = basis.synthesize(&v);
    let mut value = basis.lp_norm_of_grid(&grid, p);
    for _ in 0..iterations {
        let g: Vec<f64> = grid.iter().map(|u| u.abs().powf(p - 2.0) * u).collect();
        let load = basis.analyze(&g);
        let mut w: Vec<f64> = load.iter().zip(lambda).map(|(g, l)| g / l).collect();
        w[..k1].iter_mut().for_each(|x| *x = 0.0);
        let n = h1(&w);
        if !(n > 0.0 && n.is_finite()) {
            break;
        }
        w.iter_mut().for_each(|x| *x /= n);
        let next_grid = basis.synthesize(&w);
        let next = basis.lp_norm_of_grid(&next_grid, p);
        if !(next > value * (1.0 + 1e-15)) {
            break;
        }
        v = w;
        grid = next_grid;
        value = next;
    }
    (v, value)
}

fn beta_starts(basis: &EigenBasis, k: usize, random: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = basis.dim();
    let mut starts = Vec::new();
    for j in (k - 1)..m.min(k + 3) {
        let mut c = vec![0.0; m];
        c[j] = 1.0;
        starts.push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    for _ in 0..random {
        let c: Vec<f64> = (0..m)
            .map(|j| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g / basis.eigenvalue(j)
            })
            .collect();
        starts.push(c);
    }
    starts
}

/// Lower estimate of `β_k = sup{|v|_p : v ∈ Z_k, ‖v‖ = 1}` by fixed-point
/// ascent `v ← (−Δ)⁻¹P(|v|^{p−2}v)/‖·‖` from several starts.
pub fn estimate_beta_k(basis: &EigenBasis, k: usize, p: f64, config: &SearchConfig) -> Result<f64> {
    Ok(beta_sequence(basis, k, k, p, config)?[0].1)
}

/// `β_k` for `k = k_min..=k_max`, computed downward so that each shell also
/// starts from the maximizer of the next one; the estimates are therefore
/// nonincreasing in `k` by construction.
pub fn beta_sequence(basis: &EigenBasis, k_min: usize, k_max: usize, p: f64, config: &SearchConfig) -> Result<Vec<(usize, f64)>> {
    let m = basis.dim();
    if k_min < 1 || k_max > m || k_min > k_max {
        return Err(Error::param("k", format!("need 1 ≤ k ≤ m = {m}, got {k_min}..={k_max}")));
    }
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::param("p", format!("must be at least 2, got {p}")));
    }
    let lambda: Vec<f64> = basis.eigenvalues().collect();
    let mut out = Vec::new();
    let mut carry: Option<Vec<f64>> = None;
    for k in (k_min..=k_max).rev() {
        let mut starts = beta_starts(basis, k, config.beta_starts, config.rng_seed);
        if let Some(c) = &carry {
            starts.push(c.clone());
        }
        let runs: Vec<(Vec<f64>, f64)> = starts
            .par_iter()
            .map(|s| beta_ascent(basis, &lambda, k, p, s, config.beta_iterations))
            .collect();
        let (best, value) = runs
            .into_iter()
            .fold((Vec::new(), f64::NEG_INFINITY), |acc, r| if r.1 > acc.1 { r } else { acc });
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("β estimate at k = {k}")));
        }
        out.push((k, value));
        carry = Some(best);
    }
    out.reverse();
    Ok(out)
}

/// Smallest radius past which `Φ ≤ 0` along every sampled unit direction of
/// `Y_k = span{e_1, …, e_k}`.
pub fn estimate_rho_k(problem: &KirchhoffProblem, k: usize, samples: usize, seed: u64) -> Result<f64> {
    let m = problem.dim();
    if k < 1 || k > m {
        return Err(Error::param("k", format!("need 1 ≤ k ≤ m = {m}, got {k}")));
    }
    let lambda = problem.lambda();
    let mut dirs = Vec::new();
    for j in 0..k {
        let mut c = vec![0.0; m];
        c[j] = 1.0 / lambda[j].sqrt();
        dirs.push(c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1000 + k as u64);
    for _ in 0..samples {
        let mut c = vec![0.0; m];
        for j in 0..k {
            let g: f64 = StandardNormal.sample(&mut rng);
            c[j] = g / lambda[j].sqrt();
        }
        let n = problem.norm_sq(&c).sqrt();
        if n > 0.0 {
            c.iter_mut().for_each(|x| *x /= n);
            dirs.push(c);
        }
    }
    let energy = |c: &[f64], r: f64| problem.evaluate(&c.iter().map(|x| r * x).collect::<Vec<_>>(), false).energy;
    let mut rho = 0.0f64;
    for d in &dirs {
        let mut hi = 1.0;
        let mut guard = 0;
        while energy(d, hi) > 0.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::Degenerate("Φ stays positive along a direction of Y_k".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if energy(d, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        rho = rho.max(hi);
    }
    Ok(rho)
}

/// `n_seeds` points of `N_k^m` (sphere of radius `r_k` in `Z_k`) whose
/// distance to both cones is at least `μ_m`.
pub fn generate_seeds(
    problem: &KirchhoffProblem,
    geometry: &FountainGeometry,
    cone: &ConeGeometry,
    n_seeds: usize,
    seed: u64,
) -> Result<Vec<GalerkinVector>> {
    let m = problem.dim();
    let k = geometry.k;
    if k < 2 || m <= k + 2 || m != geometry.m {
        return Err(Error::param("k", format!("need 2 ≤ k, m > k + 2, got k = {k}, m = {m}")));
    }
    let lambda = problem.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let mut out = Vec::with_capacity(n_seeds);
    let max_attempts = 100 * n_seeds.max(1);
    let mut attempts = 0;
    while out.len() < n_seeds {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::SeedRetries(format!(
                "only {} of {n_seeds} seeds cleared μ_m = {:.3e} after {max_attempts} draws; μ_m is too large",
                out.len(),
                cone.mu_m
            )));
        }
        let mut c = vec![0.0; m];
        for j in (k - 1)..m {
            let g: f64 = StandardNormal.sample(&mut rng);
            c[j] = g / lambda[j];
        }
        let n = problem.norm_sq(&c).sqrt();
        if !(n > 0.0) {
            continue;
        }
        c.iter_mut().for_each(|x| *x *= geometry.r_k / n);
        let dp = problem.cone_distance_raw(&c, Cone::Positive, cone.proxy);
        let dn = problem.cone_distance_raw(&c, Cone::Negative, cone.proxy);
        if dp >= cone.mu_m && dn >= cone.mu_m {
            out.push(GalerkinVector::new(c));
        }
    }
    Ok(out)
}

/// Connected components of `{u > thr}` and `{u < −thr}` on a uniform grid, minus one.
pub fn count_sign_changes(basis: &EigenBasis, u: &GalerkinVector, per_axis: usize) -> usize {
    let (coords, values) = basis.sample_uniform(u, per_axis);
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0;
    }
    let thr = 1e-8 * peak;
    let sign: Vec<i8> = values
        .iter()
        .map(|&v| if v > thr { 1 } else if v < -thr { -1 } else { 0 })
        .collect();
    let dims: Vec<usize> = coords.iter().map(Vec::len).collect();
    let mut label = vec![false; sign.len()];
    let mut components = 0usize;
    let mut stack = Vec::new();
    for start in 0..sign.len() {
        if sign[start] == 0 || label[start] {
            continue;
        }
        components += 1;
        label[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let mut neighbours = Vec::with_capacity(4);
            if dims.len() == 1 {
                if i > 0 {
                    neighbours.push(i - 1);
                }
                if i + 1 < dims[0] {
                    neighbours.push(i + 1);
                }
            } else {
                let ny = dims[1];
                let (ix, iy) = (i / ny, i % ny);
                if ix > 0 {
                    neighbours.push(i - ny);
                }
                if ix + 1 < dims[0] {
                    neighbours.push(i + ny);
                }
                if iy > 0 {
                    neighbours.push(i - 1);
                }
                if iy + 1 < ny {
                    neighbours.push(i + 1);
                }
            }
            for j in neighbours {
                if !label[j] && sign[j] == sign[i] {
                    label[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    components.saturating_sub(1)
}

/// Flips `u` so that its largest coefficient is positive.
fn canonical_sign(c: &mut [f64]) {
    let lead = c.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if lead < 0.0 {
        c.iter_mut().for_each(|x| *x = -*x);
    }
}

fn build_record(
    problem: &KirchhoffProblem,
    coeffs: GalerkinVector,
    residual: f64,
    k: usize,
    sign_tolerance: f64,
    config: &SearchConfig,
    stats: (usize, usize),
) -> Result<SolutionRecord> {
    let energy = problem.energy(&coeffs)?;
    let parts = problem.positive_part_norms(&coeffs)?;
    let per_axis = if problem.basis().domain().dim() == 1 {
        config.nodal_grid
    } else {
        config.nodal_grid.min(256)
    };
    let sign_changes = count_sign_changes(problem.basis(), &coeffs, per_axis);
    let sign_changing = parts.h1_plus.min(parts.h1_minus) > sign_tolerance && sign_changes >= 1;
    Ok(SolutionRecord {
        norm: problem.basis().h1_norm(&coeffs),
        coefficients: coeffs,
        energy,
        residual,
        h1_plus: parts.h1_plus,
        h1_minus: parts.h1_minus,
        l2_plus: parts.l2_plus,
        l2_minus: parts.l2_minus,
        sign_changes,
        sign_changing,
        k,
        m: problem.dim(),
        hits: 1,
        outer_iterations: stats.0,
        newton_iterations: stats.1,
    })
}

/// Whether `u` equals `v` or `−v` within `tol·(1 + ‖u‖)`.
pub fn same_up_to_sign(problem: &KirchhoffProblem, u: &GalerkinVector, v: &GalerkinVector, tol: f64) -> bool {
    let scale = 1.0 + problem.basis().h1_norm(u);
    let d1 = problem.basis().h1_norm(&(u - v));
    let d2 = problem.basis().h1_norm(&(u + v));
    d1.min(d2) <= tol * scale
}

/// Geometry of shell `k` at the problem's dimension.
pub fn shell_geometry(
    problem: &KirchhoffProblem,
    k: usize,
    beta_k: f64,
    config: &SearchConfig,
) -> Result<(FountainGeometry, ConeGeometry)> {
    let nl = problem.nonlinearity();
    let p = nl.growth_exponent();
    let (c5, c6) = primitive_constants(nl.as_ref(), problem.basis().points());
    let (r_k, b_k) = compute_r_k(beta_k, problem.params(), p, c5, c6)?;
    let crossing = estimate_rho_k(problem, k, config.geometry_samples.min(64), config.rng_seed)?;
    // any radius past the crossing works; keep it strictly outside N_k
    let rho_k = crossing.max(r_k * (1.0 + 1e-9));
    let delta = problem.estimate_delta_m(k, r_k, config.geometry_samples, config.rng_seed ^ k as u64)?;
    let cone = ConeGeometry::from_delta(delta, DistanceProxy::Lifted)?;
    Ok((
        FountainGeometry {
            k,
            m: problem.dim(),
            beta_k,
            r_k,
            b_k,
            rho_k,
        },
        cone,
    ))
}

/// Runs every shell in `ks`, deduplicates modulo sign and classifies.
pub fn search(problem: &KirchhoffProblem, ks: std::ops::RangeInclusive<usize>, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let m = problem.dim();
    if ks.is_empty() {
        return Ok(SearchOutcome {
            shells: Vec::new(),
            records: Vec::new(),
        });
    }
    let (k_min, k_max) = (*ks.start(), *ks.end());
    if k_min < 2 || m <= k_max + 2 {
        return Err(Error::param("k", format!("need 2 ≤ k and m > k + 2; got k = {k_min}..={k_max}, m = {m}")));
    }
    let p = problem.nonlinearity().growth_exponent();
    let betas = beta_sequence(problem.basis(), k_min, k_max, p, config)?;
    let mut records: Vec<SolutionRecord> = Vec::new();
    let mut shells = Vec::new();
    for (k, beta_k) in betas {
        let (geometry, cone) = shell_geometry(problem, k, beta_k, config)?;
        let seeds = generate_seeds(problem, &geometry, &cone, config.seeds_per_shell, config.rng_seed)?;
        let runs: Vec<Result<crate::critical::CriticalPoint>> = seeds
            .par_iter()
            .map(|s| minimax(problem, k, &s.scaled(1.0 / geometry.r_k), &config.minimax))
            .collect();
        let sign_tol = config.sign_tolerance_factor * geometry.r_k;
        let mut converged = 0;
        let mut failed = 0;
        let mut new_records = 0;
        let mut level: Option<f64> = None;
        for run in runs {
            let cp = match run {
                Ok(cp) if cp.converged => cp,
                Ok(_) => {
                    failed += 1;
                    continue;
                }
                Err(e) => {
                    log::debug!("shell {k}: seed failed: {e}");
                    failed += 1;
                    continue;
                }
            };
            converged += 1;
            if let Some(r) = records
                .iter_mut()
                .find(|r| same_up_to_sign(problem, &r.coefficients, &cp.u, config.dedup_tolerance))
            {
                r.hits += 1;
                continue;
            }
            let mut c = cp.u.into_coeffs();
            canonical_sign(&mut c);
            let rec = build_record(
                problem,
                GalerkinVector::new(c),
                cp.residual_norm,
                k,
                sign_tol,
                config,
                (cp.outer_iterations, cp.newton_iterations),
            )?;
            if rec.sign_changing {
                level = Some(level.map_or(rec.energy, |l: f64| l.min(rec.energy)));
            }
            new_records += 1;
            records.push(rec);
        }
        log::info!(
            "shell {k}: {converged}/{} converged, {new_records} new, r_k = {:.4}",
            seeds.len(),
            geometry.r_k
        );
        shells.push(ShellReport {
            k,
            geometry,
            cone,
            seeds: seeds.len(),
            converged,
            failed,
            new_records,
            level,
        });
    }
    records.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(SearchOutcome { shells, records })
}

/// Result of re-solving a record on a finer Galerkin space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub record: SolutionRecord,
    pub m_from: usize,
    pub m_to: usize,
    /// `None` when flagged.
    pub energy_drift: Option<f64>,
    pub relative_drift: Option<f64>,
    /// `min(‖u⁺‖, ‖u⁻‖)` before and after.
    pub min_part: (f64, Option<f64>),
    pub classification_preserved: bool,
    /// Set when the refined solve failed and `record` is the original.
    pub flagged: bool,
}

/// Zero-pads `record` into `Y_{m′}` and re-converges it there with Newton's
/// method (descent along `−V` would leave a saddle), falling back to the shell
/// minimax from the embedded direction.
pub fn refine_in_m(
    problem: &KirchhoffProblem,
    record: &SolutionRecord,
    m_new: usize,
    config: &SearchConfig,
) -> Result<(KirchhoffProblem, Refinement)> {
    if m_new <= problem.dim() {
        return Err(Error::param("m", format!("refinement needs m′ > m = {}, got {m_new}", problem.dim())));
    }
    let p = problem.nonlinearity().growth_exponent();
    let fine_basis = EigenBasis::with_exponent(*problem.basis().domain(), m_new, p)?;
    let fine = problem.with_basis(Arc::new(fine_basis));
    let embedded = fine.basis().embed(problem.basis(), &record.coefficients)?;
    let sign_tol = config.sign_tolerance_factor * record.norm;
    let outcome = newton_polish(&fine, &embedded, config.minimax.tolerance, config.minimax.max_newton)
        .map(|(u, res, its)| (u, res, (0, its)))
        .or_else(|e| {
            // far from the fine solution Newton can stall; restart the minimax
            // on the same shell from the embedded direction
            log::debug!("refinement Newton failed ({e}); falling back to minimax");
            let n = fine.basis().h1_norm(&embedded);
            if !(n > 0.0) || record.k < 2 || m_new <= record.k + 2 {
                return Err(e);
            }
            let cp = minimax(&fine, record.k, &embedded.scaled(1.0 / n), &config.minimax)?;
            if cp.converged {
                Ok((cp.u, cp.residual_norm, (cp.outer_iterations, cp.newton_iterations)))
            } else {
                Err(Error::NoConvergence("refined minimax did not converge".into()))
            }
        });
    let refinement = match outcome {
        Ok((u, res, stats)) => {
            let rec = build_record(&fine, u, res, record.k, sign_tol, config, stats)?;
            let drift = rec.energy - record.energy;
            Refinement {
                m_from: problem.dim(),
                m_to: m_new,
                energy_drift: Some(drift),
                relative_drift: Some(drift.abs() / record.energy.abs().max(f64::MIN_POSITIVE)),
                min_part: (record.min_part(), Some(rec.min_part())),
                classification_preserved: rec.sign_changing == record.sign_changing,
                flagged: false,
                record: SolutionRecord { hits: record.hits, ..rec },
            }
        }
        Err(e) => {
            log::warn!("refinement to m = {m_new} failed: {e}");
            Refinement {
                record: record.clone(),
                m_from: problem.dim(),
                m_to: m_new,
                energy_drift: None,
                relative_drift: None,
                min_part: (record.min_part(), None),
                classification_preserved: false,
                flagged: true,
            }
        }
    };
    Ok((fine, refinement))
}
