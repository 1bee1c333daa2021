//! Dirichlet-Laplacian eigenbases on intervals and rectangles.
//!
//! Functions in the Galerkin space `Y_m` are stored as coefficient vectors in
//! the L²-orthonormal eigenbasis `e_1, …, e_m`. In these coordinates the
//! Dirichlet inner product `∫∇u·∇v` is diagonal with weights `λ_j`, so the
//! H¹₀ norm is `Σ λ_j c_j²` and `|u|₂² = Σ c_j²`.
//!
//! Nonlinear integrals go through a tensor Gauss–Legendre grid: [`EigenBasis::to_grid`]
//! synthesises values at the nodes and [`EigenBasis::project`] takes them back
//! by quadrature against each mode.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{nodes_for_frequency, GaussLegendre};

/// Product domains with closed-form Dirichlet eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { length_x: f64, length_y: f64 },
}

impl Domain {
    pub fn interval(length: f64) -> Result<Self> {
        let d = Domain::Interval { length };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(length_x: f64, length_y: f64) -> Result<Self> {
        let d = Domain::Rectangle { length_x, length_y };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &l) in self.lengths().iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "side {} has length {l}; lengths must be positive and finite",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn lengths(&self) -> Vec<f64> {
        match *self {
            Domain::Interval { length } => vec![length],
            Domain::Rectangle { length_x, length_y } => vec![length_x, length_y],
        }
    }
}

/// One eigenpair: sine indices per axis and `λ = Σ (n_i π / L_i)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: Vec<usize>,
    pub eigenvalue: f64,
}

/// Quadrature and sine tables along one axis.
#[derive(Debug, Clone)]
struct Axis {
    length: f64,
    rule: GaussLegendre,
    /// `sines[n-1][q] = √(2/L) sin(nπx_q/L)` for `n = 1..=max_index`.
    sines: Vec<Vec<f64>>,
}

impl Axis {
    fn new(length: f64, nodes: usize, max_index: usize) -> Self {
        let rule = GaussLegendre::new(nodes, 0.0, length);
        let sines = (1..=max_index)
            .map(|n| {
                rule.nodes
                    .iter()
                    .map(|&x| sine(length, n, x))
                    .collect()
            })
            .collect();
        Axis {
            length,
            rule,
            sines,
        }
    }
}

fn sine(length: f64, n: usize, x: f64) -> f64 {
    (2.0 / length).sqrt() * (n as f64 * PI * x / length).sin()
}

fn sine_derivative(length: f64, n: usize, x: f64) -> f64 {
    let k = n as f64 * PI / length;
    (2.0 / length).sqrt() * k * (k * x).cos()
}

/// Analytic eigenpairs of `−Δ` with Dirichlet conditions plus a tensor
/// Gauss–Legendre grid. Immutable after construction.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    domain: Domain,
    modes: Vec<Mode>,
    axes: Vec<Axis>,
    /// Node coordinates, flattened row-major over the axes.
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `eval[j * n_points + q] = e_j(x_q)`.
    eval: Vec<f64>,
}

impl EigenBasis {
    /// Builds the first `m` modes (sorted by eigenvalue, ties broken by
    /// lexicographic index) with `nodes_per_axis` Gauss–Legendre nodes on
    /// each axis.
    pub fn build(domain: Domain, m: usize, nodes_per_axis: usize) -> Result<Self> {
        domain.validate()?;
        if m == 0 {
            return Err(Error::param("m", "mode count must be at least 1"));
        }
        if nodes_per_axis == 0 {
            return Err(Error::param("quadrature", "need at least one node per axis"));
        }
        let modes = enumerate_modes(&domain, m);
        let lengths = domain.lengths();
        let axes: Vec<Axis> = lengths
            .iter()
            .enumerate()
            .map(|(a, &l)| {
                let max_index = modes.iter().map(|md| md.index[a]).max().unwrap_or(1);
                Axis::new(l, nodes_per_axis, max_index)
            })
            .collect();

        let (points, weights) = tensor_grid(&axes);
        let n_points = weights.len();
        let mut eval = vec![0.0; m * n_points];
        for (j, mode) in modes.iter().enumerate() {
            let row = &mut eval[j * n_points..(j + 1) * n_points];
            match axes.len() {
                1 => row.copy_from_slice(&axes[0].sines[mode.index[0] - 1]),
                _ => {
                    let sx = &axes[0].sines[mode.index[0] - 1];
                    let sy = &axes[1].sines[mode.index[1] - 1];
                    let ny = sy.len();
                    for (i, &vx) in sx.iter().enumerate() {
                        for (k, &vy) in sy.iter().enumerate() {
                            row[i * ny + k] = vx * vy;
                        }
                    }
                }
            }
        }
        Ok(EigenBasis {
            domain,
            modes,
            axes,
            points,
            weights,
            eval,
        })
    }

    /// Builds with the node count from [`recommended_nodes`] for growth
    /// exponent `p`.
    pub fn with_exponent(domain: Domain, m: usize, p: f64) -> Result<Self> {
        let q = recommended_nodes(&domain, m, p)?;
        Self::build(domain, m, q)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.modes[j].eigenvalue
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.eigenvalue)
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.axes[0].rule.len()
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values of mode `j` at the quadrature nodes.
    pub fn mode_values(&self, j: usize) -> &[f64] {
        let n = self.n_points();
        &self.eval[j * n..(j + 1) * n]
    }

    /// Groups equal eigenvalues (relative gap ≤ 1e-12) into `(λ, multiplicity)`.
    pub fn multiplicities(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for lam in self.eigenvalues() {
            match out.last_mut() {
                Some((prev, count)) if nearly_equal(*prev, lam) => *count += 1,
                _ => out.push((lam, 1)),
            }
        }
        out
    }

    fn check_len(&self, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: len,
            });
        }
        Ok(())
    }

    /// Pointwise values `Σ c_j e_j(x_q)` at the quadrature nodes.
    pub fn to_grid(&self, u: &GalerkinVector) -> Result<Vec<f64>> {
        self.check_len(u.len(), self.dim())?;
        Ok(self.synthesize(u.coeffs()))
    }

    pub(crate) fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n_points();
        let mut out = vec![0.0; n];
        for (j, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.eval[j * n..(j + 1) * n];
            for (o, &e) in out.iter_mut().zip(row) {
                *o += c * e;
            }
        }
        out
    }

    /// L² projection of grid values onto `Y_m`: `c_j = Σ_q w_q g_q e_j(x_q)`.
    pub fn project(&self, values: &[f64]) -> Result<GalerkinVector> {
        self.check_len(values.len(), self.n_points())?;
        Ok(GalerkinVector::new(self.analyze(values)))
    }

    pub(crate) fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n_points();
        let weighted: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| g * w)
            .collect();
        (0..self.dim())
            .map(|j| {
                self.eval[j * n..(j + 1) * n]
                    .iter()
                    .zip(&weighted)
                    .map(|(e, g)| e * g)
                    .sum()
            })
            .collect()
    }

    /// Quadrature of grid values over the domain.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Dirichlet inner product `∫∇u·∇v = Σ λ_j u_j v_j`.
    pub fn h1_inner(&self, u: &GalerkinVector, v: &GalerkinVector) -> f64 {
        u.coeffs()
            .iter()
            .zip(v.coeffs())
            .zip(self.eigenvalues())
            .map(|((a, b), l)| l * a * b)
            .sum()
    }

    pub fn h1_norm_sq(&self, u: &GalerkinVector) -> f64 {
        self.h1_inner(u, u)
    }

    /// `‖u‖ = (∫|∇u|²)^{1/2}`.
    pub fn h1_norm(&self, u: &GalerkinVector) -> f64 {
        self.h1_norm_sq(u).sqrt()
    }

    pub fn l2_norm(&self, u: &GalerkinVector) -> f64 {
        u.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `|u|_p` by quadrature of `|u|^p` on the grid.
    pub fn lp_norm(&self, u: &GalerkinVector, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::param("p", format!("Lebesgue exponent must be ≥ 1, got {p}")));
        }
        let grid = self.to_grid(u)?;
        Ok(self.lp_norm_of_grid(&grid, p))
    }

    pub(crate) fn lp_norm_of_grid(&self, grid: &[f64], p: f64) -> f64 {
        let s: f64 = grid
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v.abs().powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    /// Analytic gradient of `u` at the quadrature nodes, one vector per axis.
    pub fn gradient_on_grid(&self, u: &GalerkinVector) -> Result<Vec<Vec<f64>>> {
        self.check_len(u.len(), self.dim())?;
        let mut out = Vec::with_capacity(self.axes.len());
        for a in 0..self.axes.len() {
            let mut g = vec![0.0; self.n_points()];
            for (j, mode) in self.modes.iter().enumerate() {
                let c = u.coeffs()[j];
                if c == 0.0 {
                    continue;
                }
                let factors: Vec<Vec<f64>> = self
                    .axes
                    .iter()
                    .enumerate()
                    .map(|(b, ax)| {
                        ax.rule
                            .nodes
                            .iter()
                            .map(|&x| {
                                if b == a {
                                    sine_derivative(ax.length, mode.index[b], x)
                                } else {
                                    sine(ax.length, mode.index[b], x)
                                }
                            })
                            .collect()
                    })
                    .collect();
                accumulate_tensor(&mut g, c, &factors);
            }
            out.push(g);
        }
        Ok(out)
    }

    /// `−Δu` at the quadrature nodes, using `∂²sin(kx) = −k² sin(kx)` axis by axis.
    pub fn neg_laplacian_on_grid(&self, u: &GalerkinVector) -> Result<Vec<f64>> {
        self.check_len(u.len(), self.dim())?;
        let mut out = vec![0.0; self.n_points()];
        for (j, mode) in self.modes.iter().enumerate() {
            let c = u.coeffs()[j];
            if c == 0.0 {
                continue;
            }
            let curvature: f64 = self
                .axes
                .iter()
                .zip(&mode.index)
                .map(|(ax, &n)| (n as f64 * PI / ax.length).powi(2))
                .sum();
            for (o, e) in out.iter_mut().zip(self.mode_values(j)) {
                *o += c * curvature * e;
            }
        }
        Ok(out)
    }

    /// Evaluates `u` at an arbitrary point of the closed domain.
    pub fn eval_at(&self, u: &GalerkinVector, point: &[f64]) -> f64 {
        self.modes
            .iter()
            .zip(u.coeffs())
            .map(|(mode, &c)| {
                c * self
                    .axes
                    .iter()
                    .zip(&mode.index)
                    .zip(point)
                    .map(|((ax, &n), &x)| sine(ax.length, n, x))
                    .product::<f64>()
            })
            .sum()
    }

    /// Samples `u` on a uniform tensor grid with `per_axis` points per axis
    /// (endpoints included). Returns per-axis coordinates and row-major values.
    pub fn sample_uniform(&self, u: &GalerkinVector, per_axis: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let per_axis = per_axis.max(2);
        let coords: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|ax| {
                (0..per_axis)
                    .map(|i| ax.length * i as f64 / (per_axis - 1) as f64)
                    .collect()
            })
            .collect();
        let total = per_axis.pow(self.axes.len() as u32);
        let mut values = vec![0.0; total];
        for (mode, &c) in self.modes.iter().zip(u.coeffs()) {
            if c == 0.0 {
                continue;
            }
            let factors: Vec<Vec<f64>> = self
                .axes
                .iter()
                .zip(&mode.index)
                .zip(&coords)
                .map(|((ax, &n), xs)| xs.iter().map(|&x| sine(ax.length, n, x)).collect())
                .collect();
            accumulate_tensor(&mut values, c, &factors);
        }
        (coords, values)
    }

    /// Zero-pads (or truncates) coefficients of a vector from another basis on
    /// the same domain, matching modes by index.
    pub fn embed(&self, other: &EigenBasis, u: &GalerkinVector) -> Result<GalerkinVector> {
        if other.domain != self.domain {
            return Err(Error::InvalidDomain("cannot embed across different domains".into()));
        }
        let mut out = vec![0.0; self.dim()];
        for (j, mode) in self.modes.iter().enumerate() {
            if let Some(i) = other.modes.iter().position(|m| m.index == mode.index) {
                out[j] = u.coeffs()[i];
            }
        }
        Ok(GalerkinVector::new(out))
    }
}

fn accumulate_tensor(out: &mut [f64], c: f64, factors: &[Vec<f64>]) {
    match factors.len() {
        1 => {
            for (o, f) in out.iter_mut().zip(&factors[0]) {
                *o += c * f;
            }
        }
        _ => {
            let ny = factors[1].len();
            for (i, fx) in factors[0].iter().enumerate() {
                let cf = c * fx;
                for (k, fy) in factors[1].iter().enumerate() {
                    out[i * ny + k] += cf * fy;
                }
            }
        }
    }
}

fn tensor_grid(axes: &[Axis]) -> (Vec<Vec<f64>>, Vec<f64>) {
    match axes.len() {
        1 => {
            let r = &axes[0].rule;
            (r.nodes.iter().map(|&x| vec![x]).collect(), r.weights.clone())
        }
        _ => {
            let (rx, ry) = (&axes[0].rule, &axes[1].rule);
            let mut pts = Vec::with_capacity(rx.len() * ry.len());
            let mut wts = Vec::with_capacity(rx.len() * ry.len());
            for (x, wx) in rx.nodes.iter().zip(&rx.weights) {
                for (y, wy) in ry.nodes.iter().zip(&ry.weights) {
                    pts.push(vec![*x, *y]);
                    wts.push(wx * wy);
                }
            }
            (pts, wts)
        }
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn enumerate_modes(domain: &Domain, m: usize) -> Vec<Mode> {
    let lengths = domain.lengths();
    let scale: Vec<f64> = lengths.iter().map(|l| (PI / l).powi(2)).collect();
    let mut modes: Vec<Mode> = match lengths.len() {
        1 => (1..=m)
            .map(|n| Mode {
                index: vec![n],
                eigenvalue: scale[0] * (n * n) as f64,
            })
            .collect(),
        _ => {
            let mut all = Vec::with_capacity(m * m);
            for n1 in 1..=m {
                for n2 in 1..=m {
                    all.push(Mode {
                        index: vec![n1, n2],
                        eigenvalue: scale[0] * (n1 * n1) as f64 + scale[1] * (n2 * n2) as f64,
                    });
                }
            }
            all
        }
    };
    modes.sort_by(|a, b| {
        if nearly_equal(a.eigenvalue, b.eigenvalue) {
            a.index.cmp(&b.index)
        } else {
            a.eigenvalue.partial_cmp(&b.eigenvalue).unwrap_or(Ordering::Equal)
        }
    });
    modes.truncate(m);
    modes
}

/// Nodes per axis for a nonlinearity of growth exponent `p`.
///
/// Takes the larger of `⌈(p+2)·n/2⌉ + 2` and the count that resolves sine
/// products of total frequency `⌈p⌉·n` (see
/// [`nodes_for_frequency`]), with `n` the largest per-axis sine index
/// among the first `m` modes.
pub fn recommended_nodes(domain: &Domain, m: usize, p: f64) -> Result<usize> {
    domain.validate()?;
    if m == 0 {
        return Err(Error::param("m", "mode count must be at least 1"));
    }
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::param("p", format!("growth exponent must be ≥ 2, got {p}")));
    }
    let modes = enumerate_modes(domain, m);
    let n_axis = modes
        .iter()
        .flat_map(|md| md.index.iter().copied())
        .max()
        .unwrap_or(1);
    let simple = (((p + 2.0) * n_axis as f64) / 2.0).ceil() as usize + 2;
    let resolved = nodes_for_frequency(p.ceil() as usize * n_axis);
    Ok(simple.max(resolved))
}

/// Coefficients of `u ∈ Y_m` in the L²-orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GalerkinVector {
    coeffs: Vec<f64>,
}

impl GalerkinVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        GalerkinVector { coeffs }
    }

    pub fn zeros(m: usize) -> Self {
        GalerkinVector { coeffs: vec![0.0; m] }
    }

    /// The `j`-th basis vector (0-based).
    pub fn unit(m: usize, j: usize) -> Self {
        let mut v = Self::zeros(m);
        v.coeffs[j] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scaled(&self, s: f64) -> Self {
        GalerkinVector::new(self.coeffs.iter().map(|c| s * c).collect())
    }

    /// `self + s·other`
    pub fn add_scaled(&self, s: f64, other: &GalerkinVector) -> Self {
        debug_assert_eq!(self.len(), other.len());
        GalerkinVector::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

impl Add for &GalerkinVector {
    type Output = GalerkinVector;
    fn add(self, rhs: &GalerkinVector) -> GalerkinVector {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &GalerkinVector {
    type Output = GalerkinVector;
    fn sub(self, rhs: &GalerkinVector) -> GalerkinVector {
        self.add_scaled(-1.0, rhs)
    }
}

impl Neg for &GalerkinVector {
    type Output = GalerkinVector;
    fn neg(self) -> GalerkinVector {
        self.scaled(-1.0)
    }
}

impl Mul<&GalerkinVector> for f64 {
    type Output = GalerkinVector;
    fn mul(self, rhs: &GalerkinVector) -> GalerkinVector {
        rhs.scaled(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(m: usize) -> EigenBasis {
        EigenBasis::with_exponent(Domain::interval(PI).unwrap(), m, 6.0).unwrap()
    }

    #[test]
    fn interval_mode_three() {
        let b = unit_interval(5);
        assert_eq!(b.modes()[2].index, vec![3]);
        assert!((b.eigenvalue(2) - 9.0).abs() < 1e-12);
        let x = 0.7;
        let e3 = b.eval_at(&GalerkinVector::unit(5, 2), &[x]);
        assert!((e3 - (2.0 / PI).sqrt() * (3.0 * x).sin()).abs() < 1e-14);
    }

    #[test]
    fn square_mode_one_two_and_multiplicity() {
        let d = Domain::rectangle(PI, PI).unwrap();
        let b = EigenBasis::build(d, 6, 24).unwrap();
        let idx: Vec<_> = b.modes().iter().map(|m| m.index.clone()).collect();
        assert_eq!(idx[0], vec![1, 1]);
        assert_eq!(idx[1], vec![1, 2]);
        assert_eq!(idx[2], vec![2, 1]);
        assert!((b.eigenvalue(1) - 5.0).abs() < 1e-12);
        let mult = b.multiplicities();
        assert_eq!(mult[0].1, 1);
        assert!((mult[1].0 - 5.0).abs() < 1e-12);
        assert_eq!(mult[1].1, 2);
        assert!(b.eigenvalues().collect::<Vec<_>>().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(matches!(Domain::interval(0.0), Err(Error::InvalidDomain(_))));
        assert!(matches!(Domain::interval(f64::NAN), Err(Error::InvalidDomain(_))));
        assert!(matches!(Domain::rectangle(1.0, -2.0), Err(Error::InvalidDomain(_))));
        assert!(Domain::interval(f64::INFINITY).is_err());
        let bad = Domain::Interval { length: -1.0 };
        assert!(EigenBasis::build(bad, 4, 8).is_err());
    }

    #[test]
    fn gram_matrix_is_identity() {
        for basis in [
            unit_interval(64),
            EigenBasis::with_exponent(Domain::rectangle(PI, 2.0).unwrap(), 30, 6.0).unwrap(),
        ] {
            let m = basis.dim();
            let mut worst = 0.0f64;
            for i in 0..m {
                for j in 0..m {
                    let g: f64 = basis
                        .mode_values(i)
                        .iter()
                        .zip(basis.mode_values(j))
                        .zip(basis.weights())
                        .map(|((a, b), w)| a * b * w)
                        .sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g - target).abs());
                }
            }
            assert!(worst < 1e-12, "Gram deviation {worst:e}");
        }
    }

    #[test]
    fn zero_and_first_mode_on_grid() {
        let b = unit_interval(8);
        let z = b.to_grid(&GalerkinVector::zeros(8)).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        let e1 = b.to_grid(&GalerkinVector::unit(8, 0)).unwrap();
        for (v, p) in e1.iter().zip(b.points()) {
            assert!((v - (2.0 / PI).sqrt() * p[0].sin()).abs() < 1e-14);
        }
        assert!(matches!(
            b.to_grid(&GalerkinVector::zeros(3)),
            Err(Error::ShapeMismatch { expected: 8, actual: 3 })
        ));
    }

    #[test]
    fn project_product_to_sum() {
        // sin x · sin 2x = (cos x − cos 3x)/2 is odd about π/2, so only even
        // sine modes survive: ∫₀^π cos(kx) sin(nx) dx = 2n/(n² − k²) for n even, k odd.
        let b = unit_interval(8);
        let g: Vec<f64> = b.points().iter().map(|p| p[0].sin() * (2.0 * p[0]).sin()).collect();
        let c = b.project(&g).unwrap();
        for (j, &cj) in c.coeffs().iter().enumerate() {
            let n = (j + 1) as f64;
            let exact = if (j + 1) % 2 == 1 {
                0.0
            } else {
                let int_cos = |k: f64| 2.0 * n / (n * n - k * k);
                (2.0 / PI).sqrt() * 0.5 * (int_cos(1.0) - int_cos(3.0))
            };
            assert!((cj - exact).abs() < 1e-12, "mode {}: {cj} vs {exact}", j + 1);
        }
    }

    #[test]
    fn project_recovers_mode() {
        let b = unit_interval(10);
        let c = b.project(b.mode_values(1)).unwrap();
        for (j, v) in c.coeffs().iter().enumerate() {
            let t = if j == 1 { 1.0 } else { 0.0 };
            assert!((v - t).abs() < 1e-13);
        }
    }

    #[test]
    fn norms_of_first_mode() {
        let b = unit_interval(4);
        let e1 = GalerkinVector::unit(4, 0);
        assert!((b.h1_norm(&e1) - 1.0).abs() < 1e-15);
        assert!((b.l2_norm(&e1) - 1.0).abs() < 1e-15);
        // ∫₀^π sin⁶ = 5π/16, so |e₁|₆⁶ = (2/π)³·5π/16 = 5/(2π²)
        let l6 = b.lp_norm(&e1, 6.0).unwrap();
        assert!((l6.powi(6) - 5.0 / (2.0 * PI * PI)).abs() < 1e-14);
        let u = GalerkinVector::new(vec![0.3, -1.0, 0.2, 0.05]);
        assert!((b.h1_norm(&u.scaled(2.0)) - 2.0 * b.h1_norm(&u)).abs() < 1e-14);
        assert!(b.lp_norm(&u, 0.5).is_err());
    }

    #[test]
    fn parseval_and_eigen_residual() {
        for basis in [
            unit_interval(24),
            EigenBasis::with_exponent(Domain::rectangle(2.0, 3.0).unwrap(), 20, 4.0).unwrap(),
        ] {
            let m = basis.dim();
            let u = GalerkinVector::new((0..m).map(|j| ((j * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect());
            let grads = basis.gradient_on_grid(&u).unwrap();
            let quad: f64 = grads.iter().map(|g| basis.integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>())).sum();
            let parseval = basis.h1_norm_sq(&u);
            assert!((quad - parseval).abs() <= 1e-10 * parseval.max(1.0), "{quad} vs {parseval}");

            for j in 0..m {
                let ej = GalerkinVector::unit(m, j);
                let lap = basis.neg_laplacian_on_grid(&ej).unwrap();
                let lam = basis.eigenvalue(j);
                for i in 0..m {
                    let r: f64 = lap
                        .iter()
                        .zip(basis.mode_values(j))
                        .zip(basis.mode_values(i))
                        .zip(basis.weights())
                        .map(|(((l, e), ei), w)| (l - lam * e) * ei * w)
                        .sum();
                    assert!(r.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn embed_zero_pads() {
        let small = unit_interval(4);
        let big = unit_interval(9);
        let u = GalerkinVector::new(vec![1.0, 2.0, 3.0, 4.0]);
        let v = big.embed(&small, &u).unwrap();
        assert_eq!(&v.coeffs()[..4], u.coeffs());
        assert!(v.coeffs()[4..].iter().all(|&c| c == 0.0));
    }
}
