//! Analytic reference trajectories `(q_d, q̇_d, q̈_d)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::Reference;

/// Per-joint reference generator. Every parameter vector has one entry per
/// joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Setpoint {
        value: Vec<f64>,
    },
    /// `a sin(ωt + φ) + b`
    Sinusoid {
        amplitude: Vec<f64>,
        omega: Vec<f64>,
        phase: Vec<f64>,
        offset: Vec<f64>,
    },
    /// Quintic rest-to-rest move from `start` to `end` over `duration`,
    /// holding `end` afterwards.
    Poly5 {
        start: Vec<f64>,
        end: Vec<f64>,
        duration: f64,
    },
}

impl ReferenceSpec {
    pub fn setpoint(value: &[f64]) -> Self {
        ReferenceSpec::Setpoint {
            value: value.to_vec(),
        }
    }

    /// Same sinusoid on every joint.
    pub fn uniform_sinusoid(n: usize, amplitude: f64, omega: f64, phase: f64, offset: f64) -> Self {
        ReferenceSpec::Sinusoid {
            amplitude: vec![amplitude; n],
            omega: vec![omega; n],
            phase: vec![phase; n],
            offset: vec![offset; n],
        }
    }

    pub fn poly5(start: &[f64], end: &[f64], duration: f64) -> Self {
        ReferenceSpec::Poly5 {
            start: start.to_vec(),
            end: end.to_vec(),
            duration,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ReferenceSpec::Setpoint { .. } => "setpoint",
            ReferenceSpec::Sinusoid { .. } => "sinusoid",
            ReferenceSpec::Poly5 { .. } => "poly5",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let field = |name: &str, values: &[f64]| -> Result<()> {
            if values.len() != n {
                return Err(Error::Reference(format!(
                    "{name} has {} entries, expected {n}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Reference(format!("{name} must be finite")));
            }
            Ok(())
        };
        match self {
            ReferenceSpec::Setpoint { value } => field("value", value),
            ReferenceSpec::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                field("amplitude", amplitude)?;
                field("omega", omega)?;
                field("phase", phase)?;
                field("offset", offset)?;
                if omega.iter().any(|w| *w < 0.0) {
                    return Err(Error::Reference("omega must be non-negative".into()));
                }
                Ok(())
            }
            ReferenceSpec::Poly5 {
                start,
                end,
                duration,
            } => {
                field("start", start)?;
                field("end", end)?;
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(Error::Reference(format!(
                        "duration must be positive, got {duration}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Samples the reference at time `t` for an `n`-joint mechanism.
pub fn reference_at(spec: &ReferenceSpec, t: f64, n: usize) -> Result<Reference> {
    spec.validate(n)?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Reference(format!(
            "time must be non-negative, got {t}"
        )));
    }
    let (pos, vel, acc) = match spec {
        ReferenceSpec::Setpoint { value } => (
            DVector::from_column_slice(value),
            DVector::zeros(n),
            DVector::zeros(n),
        ),
        ReferenceSpec::Sinusoid {
            amplitude,
            omega,
            phase,
            offset,
        } => {
            let mut pos = DVector::zeros(n);
            let mut vel = DVector::zeros(n);
            let mut acc = DVector::zeros(n);
            for i in 0..n {
                let (a, w) = (amplitude[i], omega[i]);
                let (s, c) = (w * t + phase[i]).sin_cos();
                pos[i] = a * s + offset[i];
                vel[i] = a * w * c;
                acc[i] = -a * w * w * s;
            }
            (pos, vel, acc)
        }
        ReferenceSpec::Poly5 {
            start,
            end,
            duration,
        } => {
            let tf = *duration;
            let (p, dp, ddp) = if t >= tf {
                (1.0, 0.0, 0.0)
            } else {
                let s = t / tf;
                let (s2, s3) = (s * s, s * s * s);
                (
                    s3 * (10.0 - 15.0 * s + 6.0 * s2),
                    30.0 * s2 * (1.0 - 2.0 * s + s2) / tf,
                    60.0 * s * (1.0 - 3.0 * s + 2.0 * s2) / (tf * tf),
                )
            };
            let delta = DVector::from_column_slice(end) - DVector::from_column_slice(start);
            (
                DVector::from_column_slice(start) + &delta * p,
                &delta * dp,
                &delta * ddp,
            )
        }
    };
    Reference::new(t, pos, vel, acc)
}
