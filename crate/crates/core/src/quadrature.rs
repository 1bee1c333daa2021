//! Gauss–Legendre rules on a bounded interval.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point rule on `[lo, hi]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule on `[-1, 1]` by Newton iteration on the three-term
    /// Legendre recurrence, then maps it affinely onto `[lo, hi]`.
    pub fn new(n: usize, lo: f64, hi: f64) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = (hi - lo) / 2.0;
        let mid = (hi + lo) / 2.0;
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess for the i-th largest root.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos()
                * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Roots come out descending; store them ascending and mirrored.
            nodes[i] = mid - half * x;
            nodes[n - 1 - i] = mid + half * x;
            weights[i] = half * w;
            weights[n - 1 - i] = half * w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = mid;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes per axis that keep products of sine modes up to total frequency
/// `max_frequency` (in units of `π/L`) integrated to roughly machine precision.
///
/// Gauss–Legendre with `n` nodes resolves `sin(ωy)` on `[-1, 1]` once `2n`
/// exceeds `ω` plus a margin growing like `ω^{1/3}`; here `ω =
/// max_frequency·π/2`. The constant 6.5 was fitted against direct
/// evaluation up to frequency 1536 (1e-14 absolute error).
pub fn nodes_for_frequency(max_frequency: usize) -> usize {
    let omega = max_frequency as f64 * PI / 2.0;
    ((omega / 2.0 + 6.5 * omega.cbrt()).ceil() as usize + 2).max(4)
}
