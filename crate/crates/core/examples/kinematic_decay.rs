//! Drives the two-link arm with the backstepped velocity `q̇ = η` and compares
//! `V1(t)` with `V1(0) e^{−2t}`.

use eltrack::lyapunov::max_relative_decay_error;
use eltrack::simulate::kinematic_loop;
use eltrack::{Certificate, Gains, JointState, LoopKind, ReferenceSpec, RobotModel, SimConfig};

fn main() -> eltrack::Result<()> {
    let cfg = SimConfig {
        dt: 1e-3,
        t_final: 5.0,
        initial_state: JointState::from_slices(&[-0.6, 0.9], &[0.0, 0.0])?,
        loop_kind: LoopKind::Kinematic,
        gains: Gains::scalar(1.0, 1.0, 2)?,
        model: RobotModel::two_link_planar(1.0, 1.0, 1.0, 1.0, 9.81)?,
        reference: ReferenceSpec::uniform_sinusoid(2, 0.5, 1.5, 0.0, 0.2),
        seed: 0,
    };
    let log = kinematic_loop(&cfg)?;
    let v1 = log.certificate_series(Certificate::V1);

    println!("{:>5} {:>14} {:>14}", "t", "V1", "V1(0)e^-2t");
    for row in log.rows.iter().step_by(500) {
        let exact = v1[0] * (-2.0 * row.t).exp();
        println!(
            "{:>5.1} {:>14.6e} {:>14.6e}",
            row.t, row.certificates.v1, exact
        );
    }
    let err = max_relative_decay_error(&log.times(), &v1, 2.0, cfg.t_final)?;
    println!("max relative error {err:.2e}");
    Ok(())
}
