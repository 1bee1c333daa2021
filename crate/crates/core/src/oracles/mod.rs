//! Independent reference computations used to validate the solver.

mod cone;
mod scaling;
mod shooting;

pub use cone::{exact_cone_distance, nnls, MAX_EXACT_DIM};
pub use scaling::{scaling_factor, ScalingFactor};
pub use shooting::{shoot, ShootingConfig, ShootingSolution};

use crate::basis::GalerkinVector;
use crate::error::{Error, Result};
use crate::functional::KirchhoffProblem;

/// `|(Φ(u+hv) − Φ(u−hv))/2h − ⟨Φ′(u), v⟩| / (1 + |⟨Φ′(u), v⟩|)`.
pub fn fd_gradient_check(problem: &KirchhoffProblem, u: &GalerkinVector, v: &GalerkinVector, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("must be positive, got {h}")));
    }
    let fd = (problem.energy(&u.add_scaled(h, v))? - problem.energy(&u.add_scaled(-h, v))?) / (2.0 * h);
    let exact = problem.directional(u, v)?;
    Ok((fd - exact).abs() / (1.0 + exact.abs()))
}
