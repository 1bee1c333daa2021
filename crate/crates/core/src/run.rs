//! Run configuration, orchestration and result bundles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{recommended_nodes, Domain, EigenBasis, GalerkinVector};
use crate::critical::MinimaxConfig;
use crate::error::{Error, Result};
use crate::flow::LemmaReport;
use crate::fountain::{compute_r_k, estimate_beta_k, primitive_constants, refine_in_m, search, Refinement, SearchConfig, ShellReport, SolutionRecord};
use crate::functional::{ConeGeometry, DistanceProxy, KirchhoffParams, KirchhoffProblem};
use crate::nonlinearity::{check_hypotheses, HypothesisReport, NonlinearitySpec};
use crate::oracles::{scaling_factor, shoot, ScalingFactor, ShootingConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "KIRCHHOFF_OUTPUT_DIR";

/// Uniform points per axis in profile CSVs.
pub const PLOT_POINTS: usize = 256;

/// Largest deviation `verify` accepts as a clean reload.
pub const VERIFY_THRESHOLD: f64 = 1e-12;

fn default_one() -> f64 {
    1.0
}
fn default_m() -> usize {
    64
}
fn default_k_min() -> usize {
    2
}
fn default_k_max() -> usize {
    6
}
fn default_seeds() -> usize {
    32
}
fn default_rng_seed() -> u64 {
    0x5eed
}
fn default_tolerance() -> f64 {
    1e-9
}
fn default_true() -> bool {
    true
}
fn default_lemma_samples() -> usize {
    200
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("kirchhoff-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    #[serde(default = "default_one")]
    pub a: f64,
    #[serde(default = "default_one")]
    pub b: f64,
    pub nonlinearity: NonlinearitySpec,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Gauss–Legendre nodes per axis; chosen from `m` and `p` when absent.
    #[serde(default)]
    pub quadrature_nodes: Option<usize>,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    /// `k_max < k_min` gives a run with diagnostics only.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_seeds")]
    pub seeds_per_shell: usize,
    #[serde(default = "default_rng_seed")]
    pub rng_seed: u64,
    /// Residual tolerance, relative to `1 + ‖u‖`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_true")]
    pub check_hypotheses: bool,
    #[serde(default = "default_lemma_samples")]
    pub lemma_samples: usize,
    /// Re-solve every record at this larger `m`.
    #[serde(default)]
    pub refine_to: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        KirchhoffParams::new(self.a, self.b).map_err(as_config)?;
        self.nonlinearity.build()?;
        if self.m == 0 {
            return Err(config_err("m", "must be at least 1"));
        }
        if let Some(n) = self.quadrature_nodes {
            if n < 2 {
                return Err(config_err("quadrature_nodes", "need at least 2 nodes per axis"));
            }
        }
        if self.k_min <= self.k_max {
            if self.k_min < 2 {
                return Err(config_err("k_min", format!("shells start at k = 2, got {}", self.k_min)));
            }
            if self.m <= self.k_max + 2 {
                return Err(config_err(
                    "m",
                    format!("must exceed k_max + 2 = {}, got {}", self.k_max + 2, self.m),
                ));
            }
            if self.seeds_per_shell == 0 {
                return Err(config_err("seeds_per_shell", "must be at least 1"));
            }
        }
        if self.rng_seed > i64::MAX as u64 {
            return Err(config_err("rng_seed", format!("must fit a signed 64-bit integer, got {}", self.rng_seed)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(config_err("tolerance", format!("must be positive, got {}", self.tolerance)));
        }
        if let Some(mr) = self.refine_to {
            if mr <= self.m {
                return Err(config_err("refine_to", format!("must exceed m = {}, got {mr}", self.m)));
            }
        }
        Ok(())
    }

    pub fn has_shells(&self) -> bool {
        self.k_min <= self.k_max
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            seeds_per_shell: self.seeds_per_shell,
            rng_seed: self.rng_seed,
            minimax: MinimaxConfig {
                tolerance: self.tolerance,
                ..MinimaxConfig::default()
            },
            ..SearchConfig::default()
        }
    }

    pub fn build_problem(&self) -> Result<KirchhoffProblem> {
        let nl = self.nonlinearity.build()?;
        let nodes = match self.quadrature_nodes {
            Some(n) => n,
            None => recommended_nodes(&self.domain, self.m, nl.growth_exponent())?,
        };
        let basis = EigenBasis::build(self.domain, self.m, nodes)?;
        KirchhoffProblem::new(Arc::new(basis), KirchhoffParams::new(self.a, self.b)?, nl)
    }

    /// `output_dir`, unless the environment overrides it. The override only
    /// moves the files; the echoed config keeps its own value.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config { field: name, reason },
        other => other,
    }
}

/// First backtick-quoted name in a parser message.
fn quoted_field(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let field = quoted_field(&message)
            .or_else(|| e.span().map(|s| text[s].trim().to_string()))
            .unwrap_or_else(|| "<document>".to_string());
        Error::Config { field, reason: message }
    })?;
    config.validate()?;
    let mut warnings = Vec::new();
    let nl = config.nonlinearity.build()?;
    if config.check_hypotheses {
        let xs = sample_points(&config.domain);
        warnings.extend(check_hypotheses(nl.as_ref(), config.domain.dim(), &xs).warnings);
    }
    if let Some(n) = config.quadrature_nodes {
        let rec = recommended_nodes(&config.domain, config.m, nl.growth_exponent())?;
        if n < rec {
            warnings.push(format!(
                "quadrature_nodes = {n} is below the {rec} nodes needed to integrate the nonlinearity exactly"
            ));
        }
    }
    Ok(ParsedConfig { config, warnings })
}

pub fn load_config(path: &Path) -> Result<ParsedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn sample_points(domain: &Domain) -> Vec<Vec<f64>> {
    let ls = domain.lengths();
    [0.1, 0.37, 0.5, 0.81]
        .iter()
        .map(|t| ls.iter().map(|l| t * l).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hypotheses: HypothesisReport,
    pub primitive_constants: (f64, f64),
    pub quadrature_nodes: usize,
    pub lemma: LemmaReport,
    /// Radius used for the cone-contraction part of `lemma`.
    pub lemma_mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub config: RunConfig,
    pub diagnostics: Diagnostics,
    pub shells: Vec<ShellReport>,
    /// Sorted by energy.
    pub records: Vec<SolutionRecord>,
    pub refinements: Vec<Refinement>,
    /// Wall time; kept out of `results.json` so reruns are byte-identical.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

fn random_u(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> GalerkinVector {
    GalerkinVector::new(
        (0..m)
            .map(|j| scale * rng.gen_range(-1.0..1.0) / (j as f64 + 1.0).powf(1.5))
            .collect(),
    )
}

/// Samples the `A`-lemma inequalities on random points and on points near
/// `±P_m`, the latter within `μ_m` of shell `k_min` when one is configured.
pub fn check_lemmas(config: &RunConfig) -> Result<(LemmaReport, f64)> {
    config.validate()?;
    let problem = config.build_problem()?;
    lemma_suite(config, &problem)
}

fn lemma_suite(config: &RunConfig, problem: &KirchhoffProblem) -> Result<(LemmaReport, f64)> {
    let m = problem.dim();
    let mu = if config.has_shells() {
        let k = config.k_min;
        let p = problem.nonlinearity().growth_exponent();
        let beta = estimate_beta_k(problem.basis(), k, p, &config.search_config())?;
        let (c5, c6) = primitive_constants(problem.nonlinearity().as_ref(), problem.basis().points());
        let (r_k, _) = compute_r_k(beta, problem.params(), p, c5, c6)?;
        let delta = problem.estimate_delta_m(k, r_k, 128, config.rng_seed)?;
        ConeGeometry::from_delta(delta, DistanceProxy::Lifted)?.mu_m
    } else {
        0.1
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n = config.lemma_samples.max(2);
    let e1 = GalerkinVector::unit(m, 0);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        if i % 2 == 0 {
            let scale = [0.1, 0.5, 1.0, 2.0][(i / 2) % 4];
            samples.push(random_u(&mut rng, m, scale));
        } else {
            let amp: f64 = rng.gen_range(0.05..1.5);
            let size: f64 = rng.gen_range(0.0..0.5) * mu;
            let pert = random_u(&mut rng, m, size);
            let sign = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            samples.push(e1.scaled(sign * amp / problem.basis().eigenvalue(0).sqrt()).add_scaled(1.0, &pert));
        }
    }
    Ok((problem.check_a_lemma(&samples, mu)?, mu))
}

/// Runs the configured search and assembles the bundle (no files written).
pub fn run(config: &RunConfig) -> Result<ResultBundle> {
    config.validate()?;
    let start = Instant::now();
    let problem = config.build_problem()?;
    let nl = problem.nonlinearity().clone();
    let hypotheses = check_hypotheses(nl.as_ref(), config.domain.dim(), &sample_points(&config.domain));
    let constants = primitive_constants(nl.as_ref(), problem.basis().points());
    let (lemma, lemma_mu) = lemma_suite(config, &problem)?;
    let search_config = config.search_config();
    let (shells, records) = if config.has_shells() {
        let out = search(&problem, config.k_min..=config.k_max, &search_config)?;
        (out.shells, out.records)
    } else {
        (Vec::new(), Vec::new())
    };
    let mut refinements = Vec::new();
    if let Some(m_new) = config.refine_to {
        for rec in &records {
            refinements.push(refine_in_m(&problem, rec, m_new, &search_config)?.1);
        }
    }
    Ok(ResultBundle {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        diagnostics: Diagnostics {
            hypotheses,
            primitive_constants: constants,
            quadrature_nodes: problem.basis().nodes_per_axis(),
            lemma,
            lemma_mu,
        },
        shells,
        records,
        refinements,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

impl ResultBundle {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Schema(format!(
                    "bundle schema version {v}, this build reads {SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::Schema("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# records (sorted by energy)");
        let _ = writeln!(
            s,
            "{:>4} {:>3} {:>5} {:>22} {:>10} {:>12} {:>12} {:>5}",
            "id", "k", "zeros", "energy", "residual", "|u+|", "|u-|", "sign"
        );
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:>4} {:>3} {:>5} {:>22.14e} {:>10.2e} {:>12.5e} {:>12.5e} {:>5}",
                i,
                r.k,
                r.sign_changes,
                r.energy,
                r.residual,
                r.h1_plus,
                r.h1_minus,
                if r.sign_changing { "yes" } else { "no" }
            );
        }
        let _ = writeln!(s, "\n# shells");
        let _ = writeln!(
            s,
            "{:>3} {:>10} {:>10} {:>10} {:>11} {:>10} {:>10} {:>9} {:>4}",
            "k", "beta_k", "r_k", "rho_k", "b_k", "delta_m", "mu_m", "conv", "new"
        );
        for sh in &self.shells {
            let _ = writeln!(
                s,
                "{:>3} {:>10.4e} {:>10.4e} {:>10.4e} {:>11.4e} {:>10.4e} {:>10.4e} {:>4}/{:<4} {:>4}",
                sh.k,
                sh.geometry.beta_k,
                sh.geometry.r_k,
                sh.geometry.rho_k,
                sh.geometry.b_k,
                sh.cone.delta_m,
                sh.cone.mu_m,
                sh.converged,
                sh.seeds,
                sh.new_records
            );
        }
        if !self.refinements.is_empty() {
            let _ = writeln!(s, "\n# refinements");
            for (i, r) in self.refinements.iter().enumerate() {
                match r.relative_drift {
                    Some(d) => {
                        let _ = writeln!(s, "{i:>4} m {} -> {}: relative energy drift {d:.3e}", r.m_from, r.m_to);
                    }
                    None => {
                        let _ = writeln!(s, "{i:>4} m {} -> {}: FLAGGED, original kept", r.m_from, r.m_to);
                    }
                }
            }
        }
        let l = &self.diagnostics.lemma;
        let _ = writeln!(
            s,
            "\n# operator checks on {} samples: descent {}, gradient bound {}, contraction {} ({} near-cone samples, mu = {:.3e})",
            l.samples,
            ok(l.descent_violation <= 1e-12),
            ok(l.gradient_bound_violation <= 1e-12),
            ok(l.contraction_violation <= 1e-12),
            l.cone_samples,
            self.diagnostics.lemma_mu
        );
        for w in &self.diagnostics.hypotheses.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(s, "\nelapsed: {:.3} s", self.elapsed_seconds);
        s
    }

    /// Writes `results.json`, `summary.txt` and one profile CSV per record
    /// into `dir`, sequentially.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let problem = self.config.build_problem()?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("results.json".into(), self.to_json()?)?;
        put("summary.txt".into(), self.summary())?;
        for (i, r) in self.records.iter().enumerate() {
            put(format!("profile_{i:03}.csv"), profile_csv(problem.basis(), &r.coefficients))?;
        }
        Ok(written)
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "VIOLATED"
    }
}

/// `x,u` (or `x,y,u`) on the uniform plot grid.
pub fn profile_csv(basis: &EigenBasis, u: &GalerkinVector) -> String {
    let (coords, values) = basis.sample_uniform(u, PLOT_POINTS);
    let mut out = String::new();
    if coords.len() == 1 {
        out.push_str("x,u\n");
        for (x, v) in coords[0].iter().zip(&values) {
            let _ = writeln!(out, "{x:e},{v:e}");
        }
    } else {
        out.push_str("x,y,u\n");
        let ny = coords[1].len();
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{:e},{:e},{v:e}", coords[0][i / ny], coords[1][i % ny]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub records: usize,
    pub max_energy_deviation: f64,
    pub max_residual_deviation: f64,
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Recomputes energy and residual of every record from its coefficients and
/// the bundle's configuration. Deviations are relative to `1 + |value|`.
pub fn verify(bundle: &ResultBundle, config: Option<&RunConfig>) -> Result<VerifyReport> {
    if bundle.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "bundle schema version {}, this build reads {SCHEMA_VERSION}",
            bundle.schema_version
        )));
    }
    if let Some(c) = config {
        let mut a = c.clone();
        let mut b = bundle.config.clone();
        a.output_dir = PathBuf::new();
        b.output_dir = PathBuf::new();
        if a != b {
            return Err(Error::Schema("bundle was produced by a different configuration".into()));
        }
    }
    let problem = bundle.config.build_problem()?;
    let mut max_e = 0.0f64;
    let mut max_r = 0.0f64;
    for rec in &bundle.records {
        let energy = problem.energy(&rec.coefficients)?;
        let (_, residual) = problem.residual(&rec.coefficients)?;
        max_e = max_e.max((energy - rec.energy).abs() / (1.0 + energy.abs()));
        max_r = max_r.max((residual - rec.residual).abs() / (1.0 + residual));
    }
    let max_deviation = max_e.max(max_r);
    Ok(VerifyReport {
        records: bundle.records.len(),
        max_energy_deviation: max_e,
        max_residual_deviation: max_r,
        max_deviation,
        threshold: VERIFY_THRESHOLD,
        passed: max_deviation <= VERIFY_THRESHOLD,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub length: f64,
    pub zeros: usize,
    pub p: f64,
    pub slope: f64,
    /// `∫|w′|²` of the `a = 1`, `b = 0` profile.
    pub dirichlet_norm_sq: f64,
    pub energy_b0: f64,
    pub scaling: Option<ScalingFactor>,
    /// Energy of `t·w` for the requested `(a, b)`.
    pub energy: f64,
}

/// Shoots the pure-power profile `−w″ = |w|^{p−2}w` with `zeros` interior
/// zeros and rescales it to `−(a + b‖u‖²)u″ = |u|^{p−2}u`.
pub fn oracle_report(length: f64, zeros: usize, p: f64, a: f64, b: f64, csv: Option<&Path>) -> Result<OracleReport> {
    let params = KirchhoffParams::new(a, b)?;
    let nl: Arc<dyn crate::nonlinearity::Nonlinearity> = Arc::new(crate::nonlinearity::Power::new(p));
    let w = shoot(length, 1.0, nl, zeros, &ShootingConfig::default())?;
    let lp = p * w.primitive_integral;
    let scaling = if p > 4.0 {
        Some(scaling_factor(w.dirichlet_norm_sq, params, p)?)
    } else if b == 0.0 {
        None
    } else {
        return Err(Error::param("p", format!("rescaling to b > 0 needs p > 4, got {p}")));
    };
    let (t, energy) = match &scaling {
        Some(s) => (s.t, s.scaled_energy(lp)),
        None => {
            // b = 0: t^{p−2} = a
            let t = a.powf(1.0 / (p - 2.0));
            (t, 0.5 * a * t * t * w.dirichlet_norm_sq - t.powf(p) / p * lp)
        }
    };
    if let Some(path) = csv {
        w.write_csv(path, t)?;
    }
    Ok(OracleReport {
        length,
        zeros,
        p,
        slope: w.slope,
        dirichlet_norm_sq: w.dirichlet_norm_sq,
        energy_b0: w.energy,
        scaling,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
kind = "interval"
length = 3.141592653589793

[nonlinearity]
kind = "power"
p = 6.0
"#;

    #[test]
    fn minimal_config_defaults() {
        let parsed = parse_config(MINIMAL).unwrap();
        let c = parsed.config;
        assert_eq!((c.a, c.b, c.m, c.k_min, c.k_max, c.seeds_per_shell), (1.0, 1.0, 64, 2, 6, 32));
        assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
        let echo = c.to_toml().unwrap();
        assert!(echo.contains("seeds_per_shell = 32"));
        assert_eq!(parse_config(&echo).unwrap().config, c);
    }

    #[test]
    fn integer_exponent_is_accepted() {
        let text = MINIMAL.replace("p = 6.0", "p = 6");
        assert_eq!(parse_config(&text).unwrap().config.nonlinearity, NonlinearitySpec::Power { p: 6.0, coefficient: 1.0 });
    }

    #[test]
    fn low_exponent_warns() {
        let text = MINIMAL.replace("p = 6.0", "p = 3.0");
        let parsed = parse_config(&text).unwrap();
        assert!(parsed.warnings.iter().any(|w| w.contains("outside p > 4")), "{:?}", parsed.warnings);
        let quiet = format!("check_hypotheses = false\n{text}");
        assert!(parse_config(&quiet).unwrap().warnings.is_empty());
    }

    #[test]
    fn rejections_name_the_field() {
        let field = |text: &str| match parse_config(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(field(&format!("a = -1.0\n{MINIMAL}")), "a");
        assert_eq!(field(&format!("colour = 3\n{MINIMAL}")), "colour");
        assert_eq!(field("[nonlinearity]\nkind = \"power\"\np = 6.0\n"), "domain");
        assert_eq!(field(&format!("m = 5\n{MINIMAL}")), "m");
        assert_eq!(field(&format!("k_min = 1\n{MINIMAL}")), "k_min");
        assert_eq!(field(&format!("refine_to = 32\n{MINIMAL}")), "refine_to");
        assert!(matches!(
            parse_config(&MINIMAL.replace("p = 6.0", "p = 1.0")),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn empty_range_gives_diagnostics_only() {
        let text = format!("m = 8\nk_min = 3\nk_max = 2\nlemma_samples = 10\n{MINIMAL}");
        let bundle = run(&parse_config(&text).unwrap().config).unwrap();
        assert!(bundle.records.is_empty() && bundle.shells.is_empty());
        assert_eq!(bundle.diagnostics.lemma.samples, 10);
        assert!(bundle.diagnostics.lemma.holds());
    }

    #[test]
    fn b_zero_bundle_round_trips_and_matches_oracle() {
        let text = format!("b = 0.0\nm = 32\nk_min = 2\nk_max = 2\nseeds_per_shell = 2\nlemma_samples = 10\n{MINIMAL}");
        let bundle = run(&parse_config(&text).unwrap().config).unwrap();
        let json = bundle.to_json().unwrap();
        let back = ResultBundle::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        let report = verify(&back, Some(&bundle.config)).unwrap();
        assert!(report.passed && report.max_deviation <= 1e-12, "{report:?}");
        assert_eq!(report.records, bundle.records.len());

        let lowest = bundle.records.iter().find(|r| r.sign_changing).unwrap();
        let oracle = oracle_report(std::f64::consts::PI, 1, 6.0, 1.0, 0.0, None).unwrap();
        assert!((lowest.energy - oracle.energy).abs() <= 1e-8 * oracle.energy);

        let mut other = bundle.config.clone();
        other.seeds_per_shell = 3;
        assert!(matches!(verify(&back, Some(&other)), Err(Error::Schema(_))));
        let stale = json.replacen("\"schema_version\": 1", "\"schema_version\": 0", 1);
        assert!(matches!(ResultBundle::from_json(&stale), Err(Error::Schema(_))));
    }

    #[test]
    fn oracle_report_matches_b_zero_energy() {
        let r = oracle_report(std::f64::consts::PI, 1, 6.0, 1.0, 0.0, None).unwrap();
        assert!((r.energy - r.energy_b0).abs() <= 1e-10 * r.energy_b0);
        let g = oracle_report(std::f64::consts::PI, 0, 6.0, 1.0, 1.0, None).unwrap();
        assert!(g.scaling.unwrap().defect().abs() < 1e-10);
    }
}
