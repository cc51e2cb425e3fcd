mod common;

use common::*;
use eltrack::lyapunov::{derivative_series, max_relative_decay_error, vdot_along_trajectory};
use eltrack::simulate::{closed_loop, kinematic_loop, rk4_step, simulate};
use eltrack::tracking::control_torque;
use eltrack::trajgen::reference_at;
use eltrack::{
    Certificate, Error, Gains, JointState, LoopKind, ReferenceSpec, RobotModel, SimConfig,
};
use nalgebra::{DMatrix, DVector};

fn config(
    model: RobotModel,
    kind: LoopKind,
    reference: ReferenceSpec,
    q0: &[f64],
    qdot0: &[f64],
    lambda: f64,
) -> SimConfig {
    let n = model.dof();
    SimConfig {
        dt: 1e-3,
        t_final: 5.0,
        initial_state: state(q0, qdot0),
        loop_kind: kind,
        gains: Gains::scalar(lambda, 1.0, n).unwrap(),
        reference,
        model,
        seed: 0,
    }
}

fn sinusoid() -> ReferenceSpec {
    ReferenceSpec::uniform_sinusoid(2, 0.5, 1.5, 0.0, 0.2)
}

#[test]
fn kinematic_pendulum_error_is_a_pure_exponential() {
    // Constant inertia: η = q̇_d − (q − q_d), so q̃(t) = q̃(0) e^{−t}.
    let cfg = config(
        pendulum(),
        LoopKind::Kinematic,
        ReferenceSpec::setpoint(&[1.0]),
        &[0.25],
        &[0.0],
        1.0,
    );
    let log = kinematic_loop(&cfg).unwrap();
    for row in &log.rows {
        let expected = 0.75 * (-row.t).exp();
        assert!((row.q_tilde[0] - expected).abs() <= 1e-9, "t = {}", row.t);
    }
}

#[test]
fn starting_on_the_setpoint_stays_there() {
    for kind in [LoopKind::Kinematic, LoopKind::ClosedLoop] {
        let cfg = config(
            two_link(),
            kind,
            ReferenceSpec::setpoint(&[0.4, -0.3]),
            &[0.4, -0.3],
            &[0.0, 0.0],
            2.0,
        );
        let log = simulate(&cfg).unwrap();
        for row in &log.rows {
            assert!(row.q_tilde.amax() <= 1e-12, "{:?} at t = {}", kind, row.t);
        }
    }
}

#[test]
fn kinematic_two_link_v1_decays_at_twice_unit_rate() {
    let cfg = config(
        two_link_uneven(),
        LoopKind::Kinematic,
        sinusoid(),
        &[-0.6, 0.9],
        &[0.0, 0.0],
        1.0,
    );
    let log = kinematic_loop(&cfg).unwrap();
    let v1 = log.certificate_series(Certificate::V1);
    let err = max_relative_decay_error(&log.times(), &v1, 2.0, 5.0).unwrap();
    assert!(err <= 1e-6, "relative error {err:e}");

    let vdot = vdot_along_trajectory(&log, Certificate::V1).unwrap();
    for (i, (d, v)) in vdot.iter().zip(&v1).enumerate().skip(1).take(v1.len() - 2) {
        assert!((d / v + 2.0).abs() < 1e-4, "sample {i}: ratio {}", d / v);
    }
}

#[test]
fn closed_loop_started_on_the_reference_tracks_it() {
    let spec = sinusoid();
    let r0 = reference_at(&spec, 0.0, 2).unwrap();
    let cfg = config(
        two_link_uneven(),
        LoopKind::ClosedLoop,
        spec,
        r0.q_d.as_slice(),
        r0.qd_dot.as_slice(),
        2.0,
    );
    let log = closed_loop(&cfg).unwrap();
    assert!(log.rows.iter().all(|r| r.q_tilde.amax() <= 1e-9));
}

#[test]
fn runs_are_bitwise_reproducible() {
    for kind in [LoopKind::Kinematic, LoopKind::ClosedLoop] {
        let cfg = config(
            two_link_uneven(),
            kind,
            sinusoid(),
            &[-0.6, -0.6],
            &[1.19, 1.19],
            2.0,
        );
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca, 17).unwrap();
        b.write_csv(&mut cb, 17).unwrap();
        assert_eq!(ca, cb);
    }
}

#[test]
fn rk4_is_fourth_order_on_a_linear_system() {
    // Damped rotation: x(t) = e^{at} (cos wt, sin wt).
    let (a, w) = (-0.3, 2.0);
    let exact = |t: f64| {
        DVector::from_vec(vec![
            (a * t).exp() * (w * t).cos(),
            (a * t).exp() * (w * t).sin(),
        ])
    };
    let rhs = DMatrix::from_row_slice(2, 2, &[a, -w, w, a]);
    let integrate = |dt: f64| {
        let steps = (2.0 / dt).round() as usize;
        let mut x = exact(0.0);
        for i in 0..steps {
            x = rk4_step(|_, x| Ok(&rhs * x), i as f64 * dt, &x, dt).unwrap();
        }
        (x - exact(2.0)).norm()
    };
    let ratio = integrate(0.1) / integrate(0.05);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn logged_torque_and_filtered_error_recompute_exactly() {
    let cfg = config(
        two_link_uneven(),
        LoopKind::ClosedLoop,
        sinusoid(),
        &[-0.6, -0.6],
        &[1.19, 1.19],
        1.5,
    );
    let log = closed_loop(&cfg).unwrap();
    for row in &log.rows {
        let s = JointState::new(row.q.clone(), row.qdot.clone()).unwrap();
        let reference = reference_at(&cfg.reference, row.t, 2).unwrap();
        assert_eq!(reference.q_d, row.q_d);
        let tau = control_torque(&cfg.model, &s, &reference, &cfg.gains)
            .unwrap()
            .tau;
        assert_eq!(tau, row.tau);
        assert_eq!(&row.q_tilde_dot + &row.q_tilde * 1.5, row.q_r);
    }
}

#[test]
fn filtered_error_obeys_the_closed_loop_equation() {
    // M q̇_r = −(M + C) q_r along the closed loop.
    let cfg = config(
        two_link_uneven(),
        LoopKind::ClosedLoop,
        sinusoid(),
        &[-0.6, -0.6],
        &[1.19, 1.19],
        2.0,
    );
    let log = closed_loop(&cfg).unwrap();
    let dt = log.dt();
    let qr_dot: Vec<Vec<f64>> = (0..2)
        .map(|j| {
            let series: Vec<f64> = log.rows.iter().map(|r| r.q_r[j]).collect();
            derivative_series(&series, dt).unwrap()
        })
        .collect();
    for (i, row) in log.rows.iter().enumerate().skip(1).take(log.len() - 2) {
        let m = cfg.model.mass_matrix(&row.q).unwrap();
        let c = cfg.model.coriolis_matrix(&row.q, &row.qdot).unwrap();
        let lhs = &m * DVector::from_vec(vec![qr_dot[0][i], qr_dot[1][i]]);
        let rhs = -(&m + c) * &row.q_r;
        assert!((lhs - rhs).amax() < 1e-4, "t = {}", row.t);
    }
}

#[test]
fn runaway_reference_reports_divergence() {
    let spec = ReferenceSpec::uniform_sinusoid(1, 1e8, 1e3, 0.0, 0.0);
    let cfg = config(pendulum(), LoopKind::ClosedLoop, spec, &[0.0], &[0.0], 1.0);
    match closed_loop(&cfg) {
        Err(Error::Divergence { t }) => assert!(t.is_finite() && t <= 5.0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn asymmetric_pm_is_rejected_before_logging() {
    let mut cfg = config(
        two_link(),
        LoopKind::ClosedLoop,
        sinusoid(),
        &[0.0, 0.0],
        &[0.0, 0.0],
        1.0,
    );
    cfg.gains = Gains::with_matrix(
        1.0,
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
    )
    .unwrap();
    match closed_loop(&cfg) {
        Err(Error::Certificate { t, asymmetry, .. }) => {
            assert_eq!(t, 0.0);
            assert!(asymmetry > 1e-8);
        }
        other => panic!("expected certificate error, got {other:?}"),
    }
}

#[test]
fn mismatched_horizon_is_a_setup_error() {
    let mut cfg = config(
        pendulum(),
        LoopKind::ClosedLoop,
        ReferenceSpec::setpoint(&[1.0]),
        &[0.0],
        &[0.0],
        1.0,
    );
    cfg.t_final = 0.0;
    assert!(matches!(simulate(&cfg), Err(Error::Setup(_))));
    cfg.t_final = 1.00037;
    assert!(matches!(simulate(&cfg), Err(Error::Setup(_))));
}

#[test]
fn log_has_one_row_per_step_plus_initial() {
    let cfg = config(
        pendulum(),
        LoopKind::ClosedLoop,
        ReferenceSpec::setpoint(&[1.0]),
        &[0.0],
        &[0.0],
        1.0,
    );
    let log = simulate(&cfg).unwrap();
    assert_eq!(log.len(), 5001);
    assert_eq!(log.rows[0].t, 0.0);
    assert!((log.last().unwrap().t - 5.0).abs() < 1e-12);
    // At rest with q_d = 1: τ = (0 + 0 + λ·1)·1 + g·cos 0 = 1 + 9.81.
    assert!((log.rows[0].tau[0] - 10.81).abs() < 1e-12);
}
