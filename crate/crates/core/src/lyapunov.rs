//! Lyapunov certificates and their empirical decay along trajectories.
//!
//! Four quadratic forms are tracked:
//!
//! ```text
//! V1      = ½ q̃ᵀ M q̃
//! W       = ½ q_rᵀ M q_r
//! Q       = ½ q_rᵀ M q_r + ½ q̃ᵀ P q̃
//! V_total = V1 + ½ q_rᵀ P M q_r
//! ```
//!
//! `V1` decays as `e^{-2t}` on the kinematic loop and `W` decays as
//! `e^{-2t}` in closed loop. `V_total` is measured but no rate is asserted
//! for it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{symmetry_defect, RobotModel};
use crate::error::{check_len, Error, Result};
use crate::simulate::TrajectoryLog;
use crate::tracking::{validate_spd, PM_SYMMETRY_TOL};

/// Default fit window for rate estimates, seconds.
pub const DEFAULT_RATE_WINDOW: (f64, f64) = (1.0, 5.0);
/// Samples at or below this value are excluded from log-linear fits.
pub const DEFAULT_RATE_FLOOR: f64 = 1e-12;
/// Minimum number of samples for a rate fit.
pub const MIN_RATE_POINTS: usize = 10;

/// Certificate values at one time instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub v1: f64,
    pub q_cert: f64,
    pub v_total: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    V1,
    QCert,
    VTotal,
    W,
}

impl Certificate {
    pub fn column(self) -> &'static str {
        match self {
            Certificate::V1 => "v1",
            Certificate::QCert => "q_cert",
            Certificate::VTotal => "v_total",
            Certificate::W => "w",
        }
    }

    pub fn of(self, s: &LyapunovSample) -> f64 {
        match self {
            Certificate::V1 => s.v1,
            Certificate::QCert => s.q_cert,
            Certificate::VTotal => s.v_total,
            Certificate::W => s.w,
        }
    }
}

fn quad(x: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    0.5 * x.dot(&(m * x))
}

/// `½ q̃ᵀ M(q) q̃`
pub fn v1(model: &RobotModel, q: &DVector<f64>, q_tilde: &DVector<f64>) -> Result<f64> {
    check_len("q_tilde", model.dof(), q_tilde.len())?;
    let m = model.mass_matrix(q)?;
    Ok(quad(q_tilde, &m))
}

/// `½ q_rᵀ M(q) q_r`
pub fn w(model: &RobotModel, q: &DVector<f64>, q_r: &DVector<f64>) -> Result<f64> {
    check_len("q_r", model.dof(), q_r.len())?;
    let m = model.mass_matrix(q)?;
    Ok(quad(q_r, &m))
}

/// `½ q_rᵀ M(q) q_r + ½ q̃ᵀ P q̃`
pub fn q_function(
    model: &RobotModel,
    q: &DVector<f64>,
    q_r: &DVector<f64>,
    q_tilde: &DVector<f64>,
    p: &DMatrix<f64>,
) -> Result<f64> {
    validate_spd(p)?;
    check_len("P", model.dof(), p.nrows())?;
    Ok(w(model, q, q_r)? + quad(q_tilde, p))
}

/// `V1 + ½ q_rᵀ P M(q) q_r`, with the `PM` block symmetrized. Fails when
/// `PM` is not symmetric within [`PM_SYMMETRY_TOL`].
pub fn v_total(
    model: &RobotModel,
    q: &DVector<f64>,
    q_tilde: &DVector<f64>,
    q_r: &DVector<f64>,
    p: &DMatrix<f64>,
) -> Result<f64> {
    validate_spd(p)?;
    check_len("P", model.dof(), p.nrows())?;
    check_len("q_r", model.dof(), q_r.len())?;
    let m = model.mass_matrix(q)?;
    let pm = p * &m;
    let asymmetry = symmetry_defect(&pm);
    if asymmetry > PM_SYMMETRY_TOL {
        return Err(Error::Certificate {
            t: f64::NAN,
            asymmetry,
            tolerance: PM_SYMMETRY_TOL,
        });
    }
    let pm_sym = (&pm + pm.transpose()) * 0.5;
    Ok(quad(q_tilde, &m) + quad(q_r, &pm_sym))
}

/// Finite-difference derivative of a uniformly spaced series: central
/// differences inside, second-order one-sided differences at both ends.
pub fn derivative_series(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 samples to differentiate, got {n}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Setup(format!(
            "sample spacing must be positive, got {dt}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dt));
    out.extend(values.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)));
    out.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dt));
    Ok(out)
}

/// Time derivative of the selected certificate along a logged trajectory.
pub fn vdot_along_trajectory(log: &TrajectoryLog, which: Certificate) -> Result<Vec<f64>> {
    derivative_series(&log.certificate_series(which), log.dt())
}

/// `V̇/V` along a log, `None` where `V` is at or below `floor`.
pub fn decay_ratio_series(
    log: &TrajectoryLog,
    which: Certificate,
    floor: f64,
) -> Result<Vec<Option<f64>>> {
    let values = log.certificate_series(which);
    let dv = derivative_series(&values, log.dt())?;
    Ok(values
        .iter()
        .zip(dv)
        .map(|(v, d)| (*v > floor).then(|| d / v))
        .collect())
}

/// `max_t |V(t) − V(0) e^{−rate·t}| / (V(0) e^{−rate·t})` over samples with
/// `t <= t_end`. Zero when `V(0) = 0` and the series stays identically zero.
pub fn max_relative_decay_error(
    times: &[f64],
    values: &[f64],
    rate: f64,
    t_end: f64,
) -> Result<f64> {
    check_len("decay series", times.len(), values.len())?;
    let (Some(&t0), Some(&v0)) = (times.first(), values.first()) else {
        return Err(Error::InsufficientData("empty series".into()));
    };
    if v0 == 0.0 {
        let max = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        return Ok(if max == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t <= t_end + 1e-12)
        .map(|(t, v)| {
            let expected = v0 * (-rate * (t - t0)).exp();
            ((v - expected) / expected).abs()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Least-squares fit of `ln(value)` against `t` over `window`, keeping only
/// samples above `floor`. The returned rate is the negated slope.
pub fn estimate_rate(
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    floor: f64,
) -> Result<RateEstimate> {
    check_len("rate series", times.len(), values.len())?;
    let (t0, t1) = window;
    if floor.is_nan() || floor <= 0.0 {
        return Err(Error::Setup(format!(
            "rate floor must be positive, got {floor}"
        )));
    }
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(Error::Setup(format!("invalid rate window [{t0}, {t1}]")));
    }
    if let (Some(first), Some(last)) = (times.first(), times.last()) {
        let slack = 1e-9 * (1.0 + last.abs());
        if t0 < first - slack || t1 > last + slack {
            return Err(Error::InsufficientData(format!(
                "window [{t0}, {t1}] exceeds series span [{first}, {last}]"
            )));
        }
    }
    let slack = 1e-9 * (1.0 + t1.abs());
    let points: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= t0 - slack && **t <= t1 + slack && **v > floor && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    let n = points.len();
    if n < MIN_RATE_POINTS {
        return Err(Error::InsufficientData(format!(
            "{n} usable samples in [{t0}, {t1}] above floor {floor:e}, need {MIN_RATE_POINTS}"
        )));
    }
    let nf = n as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in &points {
        let (dt, dy) = (t - mean_t, y - mean_y);
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = points
        .iter()
        .map(|(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateEstimate {
        rate: -slope,
        r_squared,
        window,
        n_points: n,
    })
}
