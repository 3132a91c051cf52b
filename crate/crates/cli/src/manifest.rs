use std::path::Path;

use anyhow::Result;
use reachsim::config::{ControllerEntry, RobotDocument, SimulationEntry};
use reachsim::sim::{SimConfig, SimTrace, Termination};
use reachsim::{ChainModel, ControllerParams};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Source<T> {
    pub source: String,
    pub resolved: T,
}

#[derive(Debug, Serialize)]
pub struct TerminationInfo {
    pub reason: &'static str,
    pub time: f64,
    pub final_dx_norm: f64,
    pub final_speed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Outputs {
    pub trace: String,
    pub manifest: String,
}

/// Everything needed to reproduce a `simulate` run. Field order is fixed,
/// so identical inputs give identical bytes.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub robot: Source<RobotDocument>,
    pub controller: Source<ControllerEntry>,
    pub simulation: SimulationEntry,
    /// Dotted paths of settings that were not given and took defaults.
    pub defaulted: Vec<String>,
    pub outputs: Outputs,
    pub samples: usize,
    pub termination: TerminationInfo,
    pub wall_clock_seconds: Option<f64>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        robot_spec: &str,
        chain: &ChainModel<f64>,
        controller_spec: &str,
        controller: &ControllerParams<f64>,
        config: &SimConfig<f64>,
        defaulted: Vec<String>,
        trace_path: &Path,
        manifest_path: &Path,
        trace: &SimTrace<f64>,
        wall_clock_seconds: Option<f64>,
    ) -> Self {
        let last = trace.last();
        let message = match &trace.termination {
            Termination::NumericalFailure { message, .. } => Some(message.clone()),
            _ => None,
        };
        Self {
            version: env!("CARGO_PKG_VERSION"),
            robot: Source {
                source: robot_spec.to_string(),
                resolved: RobotDocument::from_chain(chain),
            },
            controller: Source {
                source: controller_spec.to_string(),
                resolved: ControllerEntry::from_params(controller),
            },
            simulation: SimulationEntry::from_config(config),
            defaulted,
            outputs: Outputs {
                trace: trace_path.display().to_string(),
                manifest: manifest_path.display().to_string(),
            },
            samples: trace.records.len(),
            termination: TerminationInfo {
                reason: trace.termination.label(),
                time: last.t,
                final_dx_norm: last.dx_norm,
                final_speed: last.speed,
                message,
            },
            wall_clock_seconds,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
