//! Tracking control for Euler-Lagrange manipulators.
//!
//! The crate covers the plant `M(q) q̈ + C(q, q̇) q̇ + G(q) + F(t, q̇) = τ`
//! ([`dynamics`]), a backstepped virtual velocity input and a single-gain
//! exponential torque law ([`tracking`]), reference generators
//! ([`trajgen`]), fixed-step simulation ([`simulate`]) and numerical
//! Lyapunov certificates with rate fits ([`lyapunov`]). The [`cli`] module
//! backs the `eltrack` binary.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod lyapunov;
pub mod oracles;
pub mod simulate;
pub mod tracking;
pub mod trajgen;

pub use dynamics::{CustomDynamics, Friction, JointState, ModelKind, RobotModel};
pub use error::{Error, Result};
pub use lyapunov::{Certificate, LyapunovSample, RateEstimate};
pub use simulate::{LoopKind, SimConfig, TrajectoryLog};
pub use tracking::{ControlOutput, ErrorState, Gains, Reference};
pub use trajgen::ReferenceSpec;
