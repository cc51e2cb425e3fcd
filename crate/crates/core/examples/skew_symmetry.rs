//! Samples `‖S + Sᵀ‖∞` with `S = Ṁ − 2C` on both built-in arms, then shows
//! the check catching a Coriolis matrix scaled by 10%.

use std::f64::consts::PI;

use eltrack::RobotModel;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn worst_residual(
    model: &RobotModel,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> eltrack::Result<f64> {
    let n = model.dof();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let q = DVector::from_fn(n, |_, _| rng.gen_range(-PI..PI));
        let qdot = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        worst = worst.max(model.check_skew_symmetry(&q, &qdot)?);
    }
    Ok(worst)
}

fn main() -> eltrack::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let arm = RobotModel::two_link_planar(1.0, 1.0, 1.0, 1.0, 9.81)?;
    for model in [RobotModel::pendulum(1.0, 1.0, 9.81)?, arm.clone()] {
        println!(
            "{:<18} max residual {:.2e}",
            model.name(),
            worst_residual(&model, 1000, &mut rng)?
        );
    }
    let broken = arm.with_coriolis_scale(1.1)?;
    println!(
        "{:<18} max residual {:.2e}",
        "scaled coriolis",
        worst_residual(&broken, 1000, &mut rng)?
    );
    Ok(())
}
