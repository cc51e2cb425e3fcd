//! Experiment configuration file (TOML, strict schema).
//!
//! ```toml
//! [model]
//! kind = "two_link_planar"          # or "pendulum_1dof"
//! coriolis_scale = 1.0              # optional fault-injection hook
//! [model.parameters]
//! m1 = 1.0
//! m2 = 1.0
//! l1 = 1.0
//! l2 = 1.0
//! g = 9.81
//! [model.friction]
//! kind = "zero"                     # "viscous" (coefficient), "smooth_coulomb" (level)
//!
//! [gains]
//! lambda = 2.0
//! p_scalar = 1.0                    # or p = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [reference]
//! kind = "sinusoid"
//! amplitude = [0.5, 0.5]
//! omega = [1.5, 1.5]
//! phase = [0.0, 0.0]
//! offset = [0.2, 0.2]
//!
//! [sim]
//! dt = 0.001
//! t_final = 5.0
//! q0 = [-0.6, -0.6]
//! qdot0 = [1.19, 1.19]
//! loop_kind = "closed_loop"         # "kinematic", "open_loop_passive"
//! seed = 7
//!
//! [output]
//! path = "run.csv"
//! precision = 17
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dynamics::{Friction, JointState, RobotModel};
use crate::simulate::{LoopKind, SimConfig};
use crate::tracking::Gains;
use crate::trajgen::ReferenceSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub gains: GainsConfig,
    pub reference: ReferenceSpec,
    pub sim: SimBlock,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindName {
    #[serde(rename = "pendulum_1dof")]
    Pendulum1Dof,
    TwoLinkPlanar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindName,
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub friction: FrictionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coriolis_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrictionConfig {
    #[default]
    Zero,
    Viscous {
        coefficient: f64,
    },
    SmoothCoulomb {
        level: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_scalar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    pub t_final: f64,
    pub q0: Vec<f64>,
    pub qdot0: Vec<f64>,
    pub loop_kind: LoopKind,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: None,
            precision: default_precision(),
        }
    }
}

fn default_precision() -> usize {
    17
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn build_model(&self) -> Result<RobotModel, CliError> {
        let m = &self.model;
        let (allowed, defaults): (&[&str], &[(&str, f64)]) = match m.kind {
            ModelKindName::Pendulum1Dof => (&["m", "l", "g"], &[("g", 9.81)]),
            ModelKindName::TwoLinkPlanar => (&["m1", "m2", "l1", "l2", "g"], &[("g", 9.81)]),
        };
        if let Some(unknown) = m.parameters.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(config_err(format!(
                "unknown field `model.parameters.{unknown}`, expected one of {allowed:?}"
            )));
        }
        let get = |name: &str| -> Result<f64, CliError> {
            m.parameters
                .get(name)
                .copied()
                .or_else(|| defaults.iter().find(|(k, _)| *k == name).map(|(_, v)| *v))
                .ok_or_else(|| config_err(format!("missing field `model.parameters.{name}`")))
        };
        let model = match m.kind {
            ModelKindName::Pendulum1Dof => RobotModel::pendulum(get("m")?, get("l")?, get("g")?),
            ModelKindName::TwoLinkPlanar => RobotModel::two_link_planar(
                get("m1")?,
                get("m2")?,
                get("l1")?,
                get("l2")?,
                get("g")?,
            ),
        }
        .map_err(|e| config_err(format!("model.parameters: {e}")))?;
        let friction = match m.friction {
            FrictionConfig::Zero => Friction::Zero,
            FrictionConfig::Viscous { coefficient } => Friction::Viscous { coefficient },
            FrictionConfig::SmoothCoulomb { level } => Friction::SmoothCoulomb { level },
        };
        let mut model = model
            .with_friction(friction)
            .map_err(|e| config_err(format!("model.friction: {e}")))?;
        if let Some(scale) = m.coriolis_scale {
            model = model
                .with_coriolis_scale(scale)
                .map_err(|e| config_err(format!("model.coriolis_scale: {e}")))?;
        }
        Ok(model)
    }

    pub fn build_gains(&self, n: usize) -> Result<Gains, CliError> {
        let g = &self.gains;
        if !(g.lambda.is_finite() && g.lambda > 0.0) {
            return Err(config_err(format!(
                "gains.lambda must be positive, got {}",
                g.lambda
            )));
        }
        match (&g.p_scalar, &g.p) {
            (Some(_), Some(_)) => Err(config_err(
                "gains.p_scalar and gains.p are mutually exclusive",
            )),
            (Some(p), None) => Gains::scalar(g.lambda, *p, n)
                .map_err(|e| config_err(format!("gains.p_scalar: {e}"))),
            (None, None) => {
                Gains::scalar(g.lambda, 1.0, n).map_err(|e| config_err(format!("gains: {e}")))
            }
            (None, Some(rows)) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(config_err(format!("gains.p must be {n}x{n}")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Gains::with_matrix(g.lambda, DMatrix::from_row_slice(n, n, &flat))
                    .map_err(|e| config_err(format!("gains.p: {e}")))
            }
        }
    }

    /// Fully validated simulation setup.
    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let model = self.build_model()?;
        let n = model.dof();
        let gains = self.build_gains(n)?;
        self.reference
            .validate(n)
            .map_err(|e| config_err(format!("reference: {e}")))?;
        let s = &self.sim;
        if s.q0.len() != n || s.qdot0.len() != n {
            return Err(config_err(format!(
                "sim.q0 and sim.qdot0 must have {n} entries"
            )));
        }
        let initial_state = JointState::from_slices(&s.q0, &s.qdot0)
            .map_err(|e| config_err(format!("sim initial state: {e}")))?;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            return Err(config_err(format!("sim.dt must be positive, got {}", s.dt)));
        }
        if !(s.t_final.is_finite() && s.t_final > 0.0) {
            return Err(config_err(format!(
                "sim.t_final must be positive, got {}",
                s.t_final
            )));
        }
        let cfg = SimConfig {
            dt: s.dt,
            t_final: s.t_final,
            initial_state,
            loop_kind: s.loop_kind,
            gains,
            model,
            reference: self.reference.clone(),
            seed: s.seed,
        };
        cfg.validate()
            .map_err(|e| config_err(format!("sim: {e}")))?;
        if self.output.precision == 0 || self.output.precision > 17 {
            return Err(config_err(format!(
                "output.precision must be in 1..=17, got {}",
                self.output.precision
            )));
        }
        Ok(cfg)
    }
}
