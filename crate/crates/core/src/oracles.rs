//! Finite-difference reference values for the model evaluators. These only
//! call `M(q)` and `U(q)` and are used by verification runs, never by the
//! controller or the simulator.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::RobotModel;
use crate::error::Result;

/// Central difference `(M(q + h q̇) − M(q − h q̇)) / 2h`.
pub fn mass_rate_fd(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let plus = model.mass_matrix(&(q + qdot * h))?;
    let minus = model.mass_matrix(&(q - qdot * h))?;
    Ok((plus - minus) / (2.0 * h))
}

/// Central difference gradient of the potential energy.
pub fn gravity_fd(model: &RobotModel, q: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let n = model.dof();
    let mut g = DVector::zeros(n);
    for k in 0..n {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[k] += h;
        minus[k] -= h;
        g[k] = (model.potential_energy(&plus)? - model.potential_energy(&minus)?) / (2.0 * h);
    }
    Ok(g)
}

/// Coriolis matrix assembled from finite-difference inertia partials.
pub fn coriolis_fd(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let n = model.dof();
    let mut dm = Vec::with_capacity(n);
    for k in 0..n {
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[k] += h;
        minus[k] -= h;
        dm.push((model.mass_matrix(&plus)? - model.mass_matrix(&minus)?) / (2.0 * h));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qdot[k])
            .sum()
    }))
}
