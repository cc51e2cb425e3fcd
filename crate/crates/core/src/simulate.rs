//! Fixed-step RK4 simulation of the kinematic subsystem, the closed loop and
//! the unforced plant, with a uniformly sampled trajectory log.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{JointState, RobotModel};
use crate::error::{check_len, Error, Result};
use crate::lyapunov::{Certificate, LyapunovSample};
use crate::tracking::{
    control_torque, virtual_input, ErrorState, Gains, Reference, PM_SYMMETRY_TOL,
};
use crate::trajgen::{reference_at, ReferenceSpec};

/// Any state norm above this aborts the run.
pub const DIVERGENCE_BOUND: f64 = 1e9;
/// Upper bound on `t_final / dt`.
pub const MAX_STEPS: f64 = 1e7;
/// Minimum fixed-point passes when resolving the kinematic loop's implicit
/// velocity.
pub const KINEMATIC_MIN_PASSES: usize = 2;
const KINEMATIC_MAX_PASSES: usize = 60;
const KINEMATIC_FIXED_POINT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Kinematic,
    ClosedLoop,
    OpenLoopPassive,
}

impl LoopKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LoopKind::Kinematic => "kinematic",
            LoopKind::ClosedLoop => "closed_loop",
            LoopKind::OpenLoopPassive => "open_loop_passive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub initial_state: JointState,
    pub loop_kind: LoopKind,
    pub gains: Gains,
    pub model: RobotModel,
    pub reference: ReferenceSpec,
    pub seed: u64,
}

impl SimConfig {
    /// Number of RK4 steps; the log holds one more sample than this.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Setup(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(Error::Setup(format!(
                "t_final must be at least dt, got t_final = {} with dt = {}",
                self.t_final, self.dt
            )));
        }
        let ratio = self.t_final / self.dt;
        if ratio > MAX_STEPS {
            return Err(Error::Setup(format!(
                "t_final / dt = {ratio} exceeds the limit of {MAX_STEPS}"
            )));
        }
        let steps = ratio.round();
        if (steps - ratio).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::Setup(format!(
                "t_final = {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        let steps = self.steps()?;
        let n = self.model.dof();
        check_len("initial state", n, self.initial_state.dof())?;
        check_len("gain matrix P", n, self.gains.dof())?;
        self.gains.validate()?;
        self.reference.validate(n)?;
        Ok(steps)
    }
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(mut derivative: F, t: f64, state: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let mut eval = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
        let d = derivative(t, x)?;
        check_len("state derivative", x.len(), d.len())?;
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(Error::Divergence { t })
        }
    };
    let half = 0.5 * dt;
    let k1 = eval(t, state)?;
    let k2 = eval(t + half, &(state + &k1 * half))?;
    let k3 = eval(t + half, &(state + &k2 * half))?;
    let k4 = eval(t + dt, &(state + &k3 * dt))?;
    Ok(state + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub q_d: DVector<f64>,
    pub q_tilde: DVector<f64>,
    pub q_tilde_dot: DVector<f64>,
    pub q_r: DVector<f64>,
    pub tau: DVector<f64>,
    pub certificates: LyapunovSample,
    /// Kinetic plus potential energy; not part of the CSV schema.
    pub energy: f64,
}

/// Run metadata echoed from the [`SimConfig`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogHeader {
    pub model: String,
    pub dof: usize,
    pub dt: f64,
    pub t_final: f64,
    pub loop_kind: LoopKind,
    pub lambda: f64,
    pub p_scalar: Option<f64>,
    pub reference: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn dt(&self) -> f64 {
        self.header.dt
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn certificate_series(&self, which: Certificate) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| which.of(&r.certificates))
            .collect()
    }

    pub fn energy_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy).collect()
    }

    /// Euclidean norm of the position error at each sample.
    pub fn q_tilde_norms(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.q_tilde.norm()).collect()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let n = self.header.dof;
        let mut cols = vec!["t".to_string()];
        for prefix in ["q", "qdot", "qd", "qtilde", "qr", "tau"] {
            cols.extend((0..n).map(|i| format!("{prefix}_{i}")));
        }
        cols.extend(["v1", "q_cert", "v_total", "w"].map(String::from));
        cols
    }

    fn row_values(row: &LogRow) -> Vec<f64> {
        let mut vals = vec![row.t];
        for v in [
            &row.q,
            &row.qdot,
            &row.q_d,
            &row.q_tilde,
            &row.q_r,
            &row.tau,
        ] {
            vals.extend(v.iter().copied());
        }
        let c = &row.certificates;
        vals.extend([c.v1, c.q_cert, c.v_total, c.w]);
        vals
    }

    /// Values of one CSV column, by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.csv_header().iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| Self::row_values(r)[idx]).collect())
    }

    /// Writes the log as CSV with `significant_digits` significant digits
    /// (17 round-trips every `f64`).
    pub fn write_csv<W: Write>(&self, mut out: W, significant_digits: usize) -> io::Result<()> {
        let digits = significant_digits.clamp(1, 17);
        writeln!(out, "{}", self.csv_header().join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, v) in Self::row_values(row).iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:.*e}", digits - 1, v));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    }
}

pub(crate) fn certificates(
    mass: &DMatrix<f64>,
    err: &ErrorState,
    gains: &Gains,
    t: f64,
) -> Result<LyapunovSample> {
    let quad = |x: &DVector<f64>, m: &DMatrix<f64>| 0.5 * x.dot(&(m * x));
    let v1 = quad(&err.q_tilde, mass);
    let w = quad(&err.q_r, mass);
    let q_cert = w + quad(&err.q_tilde, &gains.p);
    let v_total = match gains.p_scalar {
        Some(p) => v1 + p * w,
        None => {
            let pm = &gains.p * mass;
            let asymmetry = gains.pm_asymmetry(mass);
            if asymmetry > PM_SYMMETRY_TOL {
                return Err(Error::Certificate {
                    t,
                    asymmetry,
                    tolerance: PM_SYMMETRY_TOL,
                });
            }
            v1 + quad(&err.q_r, &((&pm + pm.transpose()) * 0.5))
        }
    };
    Ok(LyapunovSample {
        t,
        v1,
        q_cert,
        v_total,
        w,
    })
}

struct Recorder<'a> {
    config: &'a SimConfig,
    rows: Vec<LogRow>,
}

impl<'a> Recorder<'a> {
    fn new(config: &'a SimConfig, steps: usize) -> Self {
        Self {
            config,
            rows: Vec::with_capacity(steps + 1),
        }
    }

    fn record(
        &mut self,
        t: f64,
        state: JointState,
        reference: &Reference,
        tau: DVector<f64>,
    ) -> Result<()> {
        let cfg = self.config;
        let err = ErrorState::compute(&state, reference, cfg.gains.lambda)?;
        let mass = cfg.model.mass_matrix(state.q())?;
        let certs = certificates(&mass, &err, &cfg.gains, t)?;
        let energy = 0.5 * state.qdot().dot(&(&mass * state.qdot()))
            + cfg.model.potential_energy(state.q())?;
        self.rows.push(LogRow {
            t,
            q: state.q().clone(),
            qdot: state.qdot().clone(),
            q_d: reference.q_d.clone(),
            q_tilde: err.q_tilde,
            q_tilde_dot: err.q_tilde_dot,
            q_r: err.q_r,
            tau,
            certificates: certs,
            energy,
        });
        Ok(())
    }

    fn finish(self) -> TrajectoryLog {
        let cfg = self.config;
        TrajectoryLog {
            header: LogHeader {
                model: cfg.model.name().to_string(),
                dof: cfg.model.dof(),
                dt: cfg.dt,
                t_final: cfg.t_final,
                loop_kind: cfg.loop_kind,
                lambda: cfg.gains.lambda,
                p_scalar: cfg.gains.p_scalar,
                reference: cfg.reference.kind_name().to_string(),
                seed: cfg.seed,
            },
            rows: self.rows,
        }
    }
}

fn guard(t: f64, x: &DVector<f64>) -> Result<()> {
    let norm = x.norm();
    if norm.is_finite() && norm <= DIVERGENCE_BOUND {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

fn expect_kind(config: &SimConfig, kind: LoopKind) -> Result<()> {
    if config.loop_kind == kind {
        Ok(())
    } else {
        Err(Error::Setup(format!(
            "expected loop kind {}, got {}",
            kind.as_str(),
            config.loop_kind.as_str()
        )))
    }
}

/// Runs whichever loop `config.loop_kind` selects.
pub fn simulate(config: &SimConfig) -> Result<TrajectoryLog> {
    match config.loop_kind {
        LoopKind::Kinematic => kinematic_loop(config),
        LoopKind::ClosedLoop => closed_loop(config),
        LoopKind::OpenLoopPassive => open_loop_passive(config),
    }
}

/// Resolves `η = virtual_input(q, q̇ = η, e)` by fixed-point iteration seeded
/// with `guess`. `Ṁ` is linear in velocity, so the map is affine in `η`.
fn resolve_virtual_velocity(
    model: &RobotModel,
    q: &DVector<f64>,
    reference: &Reference,
    guess: &DVector<f64>,
) -> Result<DVector<f64>> {
    // Error dynamics ė = η − q̇_d, so e = q − q_d here.
    let e = q - &reference.q_d;
    let mut eta = guess.clone();
    for pass in 0..KINEMATIC_MAX_PASSES {
        let next = virtual_input(model, q, &eta, &e, &reference.qd_dot)?;
        let change = (&next - &eta).amax();
        eta = next;
        if pass + 1 >= KINEMATIC_MIN_PASSES
            && change <= KINEMATIC_FIXED_POINT_TOL * (1.0 + eta.amax())
        {
            return Ok(eta);
        }
    }
    Err(Error::Divergence { t: reference.t })
}

/// Integrates `q̇ = η` with the backstepped virtual input. Logged `τ` is zero.
pub fn kinematic_loop(config: &SimConfig) -> Result<TrajectoryLog> {
    expect_kind(config, LoopKind::Kinematic)?;
    let steps = config.validate()?;
    let model = &config.model;
    let n = model.dof();
    let spec = &config.reference;

    let mut q = config.initial_state.q().clone();
    let mut guess = reference_at(spec, 0.0, n)?.qd_dot;
    let mut rec = Recorder::new(config, steps);

    for i in 0..=steps {
        let t = i as f64 * config.dt;
        let reference = reference_at(spec, t, n)?;
        let eta = resolve_virtual_velocity(model, &q, &reference, &guess)?;
        rec.record(
            t,
            JointState::new(q.clone(), eta.clone())?,
            &reference,
            DVector::zeros(n),
        )?;
        if i == steps {
            break;
        }
        guess = eta;
        let mut stage_guess = guess.clone();
        q = rk4_step(
            |ts, qs| {
                let r = reference_at(spec, ts, n)?;
                let eta = resolve_virtual_velocity(model, qs, &r, &stage_guess)?;
                stage_guess = eta.clone();
                Ok(eta)
            },
            t,
            &q,
            config.dt,
        )?;
        guard(t + config.dt, &q)?;
    }
    Ok(rec.finish())
}

fn split(x: &DVector<f64>, n: usize) -> (DVector<f64>, DVector<f64>) {
    (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
}

fn join(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Integrates the plant driven by the tracking torque law, evaluated at every
/// RK4 stage.
pub fn closed_loop(config: &SimConfig) -> Result<TrajectoryLog> {
    expect_kind(config, LoopKind::ClosedLoop)?;
    let steps = config.validate()?;
    let model = &config.model;
    let n = model.dof();
    let spec = &config.reference;
    let gains = &config.gains;

    let dynamics = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
        let (q, qdot) = split(x, n);
        let state = JointState::new(q, qdot)?;
        let reference = reference_at(spec, t, n)?;
        let tau = control_torque(model, &state, &reference, gains)?.tau;
        let qddot = model.forward_dynamics(t, state.q(), state.qdot(), &tau)?;
        Ok(join(state.qdot(), &qddot))
    };

    let mut x = join(config.initial_state.q(), config.initial_state.qdot());
    let mut rec = Recorder::new(config, steps);
    for i in 0..=steps {
        let t = i as f64 * config.dt;
        let (q, qdot) = split(&x, n);
        let state = JointState::new(q, qdot).map_err(|_| Error::Divergence { t })?;
        let reference = reference_at(spec, t, n)?;
        let tau = control_torque(model, &state, &reference, gains)?.tau;
        rec.record(t, state, &reference, tau)?;
        if i == steps {
            break;
        }
        x = rk4_step(dynamics, t, &x, config.dt)?;
        guard(t + config.dt, &x)?;
    }
    Ok(rec.finish())
}

/// Integrates the unforced, frictionless plant (`τ = 0`). Errors and
/// certificates are still logged against the configured reference.
pub fn open_loop_passive(config: &SimConfig) -> Result<TrajectoryLog> {
    expect_kind(config, LoopKind::OpenLoopPassive)?;
    if !config.model.friction().is_zero() {
        return Err(Error::Setup(
            "open-loop passive runs require zero friction".into(),
        ));
    }
    let steps = config.validate()?;
    let model = &config.model;
    let n = model.dof();
    let zero = DVector::zeros(n);

    let dynamics = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
        let (q, qdot) = split(x, n);
        let qddot = model.forward_dynamics(t, &q, &qdot, &zero)?;
        Ok(join(&qdot, &qddot))
    };

    let mut x = join(config.initial_state.q(), config.initial_state.qdot());
    let mut rec = Recorder::new(config, steps);
    for i in 0..=steps {
        let t = i as f64 * config.dt;
        let (q, qdot) = split(&x, n);
        let state = JointState::new(q, qdot).map_err(|_| Error::Divergence { t })?;
        let reference = reference_at(&config.reference, t, n)?;
        rec.record(t, state, &reference, zero.clone())?;
        if i == steps {
            break;
        }
        x = rk4_step(dynamics, t, &x, config.dt)?;
        guard(t + config.dt, &x)?;
    }
    Ok(rec.finish())
}

/// `max_t |E(t) − E(0)| / scale`, where the scale is the larger of `|E(0)|`
/// and the peak kinetic energy along the run.
pub fn relative_energy_drift(log: &TrajectoryLog, model: &RobotModel) -> Result<f64> {
    let first = log
        .rows
        .first()
        .ok_or_else(|| Error::InsufficientData("empty log".into()))?;
    let mut peak_kinetic = 0.0f64;
    for row in &log.rows {
        peak_kinetic = peak_kinetic.max(model.kinetic_energy(&row.q, &row.qdot)?);
    }
    let scale = first.energy.abs().max(peak_kinetic);
    let drift = log
        .rows
        .iter()
        .map(|r| (r.energy - first.energy).abs())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { drift / scale } else { drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn rk4_constant_and_linear_rates() {
        let x = rk4_step(|_, x| Ok(DVector::zeros(x.len())), 0.0, &v(&[1.0]), 0.1).unwrap();
        assert_eq!(x, v(&[1.0]));
        let x = rk4_step(|_, _| Ok(v(&[1.0])), 0.0, &v(&[3.0]), 0.5).unwrap();
        assert_eq!(x, v(&[3.5]));
    }

    #[test]
    fn rk4_exponential_step() {
        let dt = 1e-3;
        let x = rk4_step(|_, x| Ok(x * -2.0), 0.0, &v(&[1.0]), dt).unwrap();
        let exact = (-2.0 * dt).exp();
        assert!(((x[0] - exact) / exact).abs() < 1e-13);
    }

    #[test]
    fn rk4_reports_non_finite_derivative() {
        let err = rk4_step(
            |t, _| Ok(v(&[if t > 0.0 { f64::NAN } else { 1.0 }])),
            2.0,
            &v(&[0.0]),
            0.1,
        );
        assert_eq!(err, Err(Error::Divergence { t: 2.0 }));
    }

    fn pendulum_config(kind: LoopKind) -> SimConfig {
        SimConfig {
            dt: 1e-3,
            t_final: 1.0,
            initial_state: JointState::at_rest(&[0.0]).unwrap(),
            loop_kind: kind,
            gains: Gains::scalar(1.0, 1.0, 1).unwrap(),
            model: RobotModel::pendulum(1.0, 1.0, 9.81).unwrap(),
            reference: ReferenceSpec::setpoint(&[1.0]),
            seed: 0,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = pendulum_config(LoopKind::ClosedLoop);
        assert_eq!(cfg.steps().unwrap(), 1000);
        cfg.t_final = 0.0;
        assert!(matches!(closed_loop(&cfg), Err(Error::Setup(_))));
        cfg.t_final = 1.0;
        cfg.dt = 0.3;
        assert!(cfg.steps().is_err());
        cfg.dt = 1e-8;
        cfg.t_final = 1.0;
        assert!(cfg.steps().is_err());
        let cfg = pendulum_config(LoopKind::Kinematic);
        assert!(closed_loop(&cfg).is_err());
    }

    #[test]
    fn passive_run_rejects_friction() {
        let mut cfg = pendulum_config(LoopKind::OpenLoopPassive);
        cfg.model = cfg
            .model
            .with_friction(crate::dynamics::Friction::Viscous { coefficient: 0.1 })
            .unwrap();
        assert!(matches!(open_loop_passive(&cfg), Err(Error::Setup(_))));
    }

    #[test]
    fn csv_layout() {
        let mut cfg = pendulum_config(LoopKind::ClosedLoop);
        cfg.t_final = 0.01;
        let log = closed_loop(&cfg).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf, 17).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,q_0,qdot_0,qd_0,qtilde_0,qr_0,tau_0,v1,q_cert,v_total,w"
        );
        assert_eq!(lines.count(), 11);
        assert!(text.ends_with('\n'));
        assert_eq!(log.column("qd_0").unwrap()[3], 1.0);
        assert!(log.column("nope").is_none());
    }
}
