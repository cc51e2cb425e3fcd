use rayon::prelude::*;
use serde::Serialize;

use super::ExperimentConfig;
use crate::lyapunov::{estimate_rate, Certificate, DEFAULT_RATE_FLOOR};
use crate::simulate::{closed_loop, LoopKind, SimConfig, TrajectoryLog};
use crate::tracking::Gains;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    PScalar,
    Dt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    /// The run finished but at least one rate fit did not.
    FitFailed,
    RunFailed,
}

/// One summary line per swept value.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: SweepStatus,
    pub qtilde_rate: Option<f64>,
    pub qtilde_r_squared: Option<f64>,
    pub w_rate: Option<f64>,
    pub w_r_squared: Option<f64>,
    pub terminal_qtilde_norm: Option<f64>,
    pub terminal_qr_norm: Option<f64>,
    pub message: String,
}

impl SweepRow {
    fn failed(value: f64, message: String) -> Self {
        Self {
            value,
            status: SweepStatus::RunFailed,
            qtilde_rate: None,
            qtilde_r_squared: None,
            w_rate: None,
            w_r_squared: None,
            terminal_qtilde_norm: None,
            terminal_qr_norm: None,
            message,
        }
    }
}

fn configure(base: &SimConfig, param: SweepParam, value: f64) -> crate::Result<SimConfig> {
    let mut cfg = base.clone();
    cfg.loop_kind = LoopKind::ClosedLoop;
    let n = cfg.model.dof();
    match param {
        SweepParam::Lambda => {
            cfg.gains = match cfg.gains.p_scalar {
                Some(p) => Gains::scalar(value, p, n)?,
                None => Gains::with_matrix(value, cfg.gains.p.clone())?,
            }
        }
        SweepParam::PScalar => cfg.gains = Gains::scalar(cfg.gains.lambda, value, n)?,
        SweepParam::Dt => cfg.dt = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(value: f64, log: &TrajectoryLog, window: (f64, f64)) -> SweepRow {
    let times = log.times();
    let qt = estimate_rate(&times, &log.q_tilde_norms(), window, DEFAULT_RATE_FLOOR);
    let w = estimate_rate(
        &times,
        &log.certificate_series(Certificate::W),
        window,
        DEFAULT_RATE_FLOOR,
    );
    let last = log.last();
    let mut messages = Vec::new();
    if let Err(e) = &qt {
        messages.push(format!("qtilde fit: {e}"));
    }
    if let Err(e) = &w {
        messages.push(format!("w fit: {e}"));
    }
    SweepRow {
        value,
        status: if messages.is_empty() {
            SweepStatus::Ok
        } else {
            SweepStatus::FitFailed
        },
        qtilde_rate: qt.as_ref().ok().map(|e| e.rate),
        qtilde_r_squared: qt.as_ref().ok().map(|e| e.r_squared),
        w_rate: w.as_ref().ok().map(|e| e.rate),
        w_r_squared: w.as_ref().ok().map(|e| e.r_squared),
        terminal_qtilde_norm: last.map(|r| r.q_tilde.norm()),
        terminal_qr_norm: last.map(|r| r.q_r.norm()),
        message: messages.join("; "),
    }
}

/// One closed-loop run per value, executed in parallel. Rows come back
/// sorted by value, whatever order the runs finish in.
pub fn run_sweep(
    exp: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    window: (f64, f64),
) -> Vec<SweepRow> {
    let base = match exp.sim_config() {
        Ok(b) => b,
        Err(e) => {
            return values
                .iter()
                .map(|v| SweepRow::failed(*v, e.to_string()))
                .collect()
        }
    };
    let mut rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| {
            configure(&base, param, value)
                .and_then(|cfg| closed_loop(&cfg))
                .map(|log| summarize(value, &log, window))
                .unwrap_or_else(|e| SweepRow::failed(value, e.to_string()))
        })
        .collect();
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    rows
}
