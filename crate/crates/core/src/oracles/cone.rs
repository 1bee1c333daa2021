//! Exact `H¹₀` distance to the grid-nonnegative cone for small `m`.

use nalgebra::{DMatrix, DVector};

use crate::basis::GalerkinVector;
use crate::error::{Error, Result};
use crate::functional::{Cone, KirchhoffProblem};

/// Largest `m` accepted by [`exact_cone_distance`].
pub const MAX_EXACT_DIM: usize = 6;

/// `min ‖Aλ − b‖` over `λ ≥ 0` by the Lawson–Hanson active-set method.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let solve_passive = |passive: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let z = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .map_err(|e| Error::NoConvergence(format!("least-squares subproblem: {e}")))?;
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        Ok(full)
    };
    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => return Ok(x),
        }
        loop {
            let z = solve_passive(&passive)?;
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..n {
                if passive[j] && z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            x += (z - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    Err(Error::NoConvergence("NNLS iteration limit".into()))
}

/// `dist(u, ±P_m)` in `H¹₀` where `P_m` is the set of `w ∈ Y_m` with
/// `w ≥ 0` at every quadrature node.
///
/// In the coordinates `y = Λ^{1/2}c` the cone is `{z : Gz ≥ 0}` with
/// `G = EΛ^{−1/2}`, `E` the node evaluation matrix. Its polar cone is
/// `{−Gᵀλ : λ ≥ 0}`, so by Moreau's decomposition the distance is `‖Gᵀλ*‖`
/// where `λ*` minimizes `‖y + Gᵀλ‖` over `λ ≥ 0`.
pub fn exact_cone_distance(problem: &KirchhoffProblem, u: &GalerkinVector, cone: Cone) -> Result<f64> {
    let m = problem.dim();
    if m > MAX_EXACT_DIM {
        return Err(Error::param(
            "m",
            format!("exact cone projection supports m ≤ {MAX_EXACT_DIM}, got {m}"),
        ));
    }
    let basis = problem.basis();
    if u.len() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            actual: u.len(),
        });
    }
    let sign = match cone {
        Cone::Positive => 1.0,
        Cone::Negative => -1.0,
    };
    let sqrt_lambda: Vec<f64> = basis.eigenvalues().map(f64::sqrt).collect();
    let y = DVector::from_iterator(m, u.coeffs().iter().zip(&sqrt_lambda).map(|(c, s)| sign * c * s));
    let n = basis.n_points();
    // Gᵀ is m × n
    let gt = DMatrix::from_fn(m, n, |j, q| basis.mode_values(j)[q] / sqrt_lambda[j]);
    let lambda = nnls(&gt, &(-&y), 50 * (n + m))?;
    Ok((gt * lambda).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Domain, EigenBasis};
    use crate::functional::{DistanceProxy, KirchhoffParams};
    use crate::nonlinearity::Power;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn problem(m: usize) -> KirchhoffProblem {
        let basis = EigenBasis::with_exponent(Domain::interval(PI).unwrap(), m, 6.0).unwrap();
        KirchhoffProblem::new(
            Arc::new(basis),
            KirchhoffParams::new(1.0, 0.0).unwrap(),
            Arc::new(Power::new(6.0)),
        )
        .unwrap()
    }

    #[test]
    fn nnls_small_instance() {
        // unconstrained optimum (1, −1) is infeasible; optimum is (0.5, 0)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let x = nnls(&a, &b, 100).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1] == 0.0, "{x}");
    }

    #[test]
    fn first_mode_cases() {
        let pr = problem(1);
        let e1 = GalerkinVector::unit(1, 0);
        assert!(exact_cone_distance(&pr, &e1, Cone::Positive).unwrap() < 1e-12);
        let d = exact_cone_distance(&pr, &(-&e1), Cone::Positive).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn second_mode_distance_and_proxy() {
        for m in 2..=4 {
            let pr = problem(m);
            let e2 = GalerkinVector::unit(m, 1);
            let exact = exact_cone_distance(&pr, &e2, Cone::Positive).unwrap();
            let proxy = pr.cone_distance_with(&e2, Cone::Positive, DistanceProxy::Lifted).unwrap();
            assert!(exact <= proxy + 1e-10, "m={m}: {exact} > {proxy}");
            assert!(exact > 0.5);
        }
        let pr = problem(2);
        let exact = exact_cone_distance(&pr, &GalerkinVector::unit(2, 1), Cone::Positive).unwrap();
        assert!((exact - 2f64.sqrt()).abs() < 1e-4, "{exact}");
    }

    #[test]
    fn rejects_large_m() {
        let pr = problem(7);
        assert!(exact_cone_distance(&pr, &GalerkinVector::zeros(7), Cone::Positive).is_err());
    }
}
