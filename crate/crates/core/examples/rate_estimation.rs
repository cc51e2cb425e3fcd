//! Fits exponential rates to `‖q̃‖` and `W` on closed-loop runs for a few
//! gains. `W` always decays at 2; `‖q̃‖` settles at about `min(λ, 1)`.

use eltrack::lyapunov::{estimate_rate, DEFAULT_RATE_FLOOR, DEFAULT_RATE_WINDOW};
use eltrack::simulate::closed_loop;
use eltrack::{Certificate, Gains, JointState, LoopKind, ReferenceSpec, RobotModel, SimConfig};

fn main() -> eltrack::Result<()> {
    let model = RobotModel::pendulum(1.0, 1.0, 9.81)?;
    println!(
        "{:>6} {:>10} {:>8} {:>10} {:>8}",
        "lambda", "qtilde", "r2", "W", "r2"
    );
    for lambda in [0.5, 1.0, 2.0, 5.0] {
        let cfg = SimConfig {
            dt: 1e-3,
            t_final: 5.0,
            // q_tilde(0) = 0.8, q_tilde_dot(0) = -0.44
            initial_state: JointState::from_slices(&[-0.6], &[1.19])?,
            loop_kind: LoopKind::ClosedLoop,
            gains: Gains::scalar(lambda, 1.0, 1)?,
            model: model.clone(),
            reference: ReferenceSpec::uniform_sinusoid(1, 0.5, 1.5, 0.0, 0.2),
            seed: 0,
        };
        let log = closed_loop(&cfg)?;
        let t = log.times();
        let qt = estimate_rate(
            &t,
            &log.q_tilde_norms(),
            DEFAULT_RATE_WINDOW,
            DEFAULT_RATE_FLOOR,
        )?;
        let w = estimate_rate(
            &t,
            &log.certificate_series(Certificate::W),
            DEFAULT_RATE_WINDOW,
            DEFAULT_RATE_FLOOR,
        )?;
        println!(
            "{lambda:>6} {:>10.4} {:>8.4} {:>10.6} {:>8.4}",
            qt.rate, qt.r_squared, w.rate, w.r_squared
        );
    }
    Ok(())
}
