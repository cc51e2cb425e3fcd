//! Unforced, frictionless runs: total energy should stay put up to the
//! integrator's truncation error.

use std::f64::consts::FRAC_PI_2;

use eltrack::simulate::{open_loop_passive, relative_energy_drift};
use eltrack::{Gains, JointState, LoopKind, ReferenceSpec, RobotModel, SimConfig};

fn main() -> eltrack::Result<()> {
    let cases = [
        (
            "pendulum, upright (at rest)",
            RobotModel::pendulum(1.0, 1.0, 9.81)?,
            vec![FRAC_PI_2],
            vec![0.0],
        ),
        (
            "pendulum, swinging",
            RobotModel::pendulum(1.0, 1.0, 9.81)?,
            vec![-0.3],
            vec![2.0],
        ),
        (
            "two-link",
            RobotModel::two_link_planar(1.0, 1.0, 1.0, 1.0, 9.81)?,
            vec![0.4, -0.7],
            vec![1.0, -0.5],
        ),
    ];
    for (label, model, q0, qdot0) in cases {
        let n = model.dof();
        for dt in [1e-2, 1e-3] {
            let cfg = SimConfig {
                dt,
                t_final: 10.0,
                initial_state: JointState::from_slices(&q0, &qdot0)?,
                loop_kind: LoopKind::OpenLoopPassive,
                gains: Gains::scalar(1.0, 1.0, n)?,
                reference: ReferenceSpec::setpoint(&vec![0.0; n]),
                model: model.clone(),
                seed: 0,
            };
            let log = open_loop_passive(&cfg)?;
            println!(
                "{label:<28} dt {dt:<6} drift {:.2e}",
                relative_energy_drift(&log, &model)?
            );
        }
    }
    Ok(())
}
