//! Serial-arm rigid-body dynamics and a human-like reaching controller.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The
//! aliases at the bottom of this file fix the scalar to `f64`, which is
//! what the config loaders and the command-line tool use.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod kinematics;
pub mod metrics;
pub mod scalar;
pub mod sim;
pub mod trace_io;
pub mod validation;

pub use chain::{canonical_7dof, canonical_home, ChainModel, LinkParams};
pub use controller::{ControllerParams, ControllerState, ObserverParams, ReachMode};
pub use error::{Error, Result};
pub use kinematics::{JacobianPair, JointState};
pub use metrics::{compute_metrics, MotionMetrics};
pub use scalar::Real;
pub use sim::{run, Disturbance, SimConfig, SimRecord, SimTrace, Simulation, Termination};

pub type Chain = ChainModel<f64>;
pub type Link = LinkParams<f64>;
pub type Controller = ControllerParams<f64>;
pub type State = JointState<f64>;
pub type Config = SimConfig<f64>;
pub type Trace = SimTrace<f64>;

pub type Chain32 = ChainModel<f32>;
pub type Controller32 = ControllerParams<f32>;
pub type Config32 = SimConfig<f32>;
pub type Trace32 = SimTrace<f32>;
