//! TOML documents describing robots, controller gains and scenarios.
//!
//! Robot description:
//!
//! ```toml
//! name = "two-link"            # optional
//! gravity = [0.0, 0.0, -9.81]  # optional, this is the default
//!
//! [[links]]
//! mass = 1.0
//! com = [0.5, 0.0, 0.0]
//! inertia = [0.0, 0.0, 0.01, 0.0, 0.0, 0.0]  # xx, yy, zz, xy, yz, xz
//! axis = [0.0, 0.0, 1.0]
//! offset = [1.0, 0.0, 0.0]
//! friction = { viscous = 0.1, coulomb = 0.2, slope = 20.0 }  # optional
//! ```
//!
//! Controller (`[controller]`) and scenario (`[simulation]`) sections are
//! fully optional field by field; omitted values fall back to documented
//! defaults and are reported in [`Resolved::defaulted`].

use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::chain::{canonical_7dof, ChainModel, LinkParams};
use crate::controller::{ControllerParams, ObserverParams, DEFAULT_OBSERVER_CUTOFF, PUBLISHED_TAU};
use crate::error::{Error, Result};
use crate::sim::{Disturbance, SimConfig};

pub const BUILTIN_ROBOT: &str = "builtin:7dof";
pub const BUILTIN_PUBLISHED: &str = "builtin:published";
pub const BUILTIN_TUNED: &str = "builtin:tuned";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionEntry {
    pub viscous: f64,
    pub coulomb: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [f64; 6],
    pub axis: [f64; 3],
    pub offset: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<[f64; 3]>,
    pub links: Vec<LinkEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ControllerEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub C: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerDocument {
    #[serde(default)]
    pub controller: ControllerEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TogglesEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity_comp: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEntry {
    /// 1-based joint index.
    pub joint: usize,
    pub torque: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toggles: Option<TogglesEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbance: Vec<DisturbanceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_substeps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    #[serde(default)]
    pub simulation: SimulationEntry,
}

/// A configuration value together with the dotted paths of every field
/// that was filled from a default.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved<V> {
    pub value: V,
    pub defaulted: Vec<String>,
}

fn config_error(source: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: source.to_string(),
        message: message.into(),
    }
}

fn parse<'de, D: Deserialize<'de>>(text: &'de str, source: &str) -> Result<D> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let message = e.message().to_string();
        match line {
            Some(l) => config_error(&format!("{source}:{l}"), message),
            None => config_error(source, message),
        }
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        let message = if e.kind() == std::io::ErrorKind::NotFound {
            "file not found".to_string()
        } else {
            e.to_string()
        };
        config_error(&path.display().to_string(), message)
    })
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl RobotDocument {
    pub fn from_chain(chain: &ChainModel<f64>) -> Self {
        let g = chain.gravity();
        Self {
            name: Some(chain.name().to_string()),
            gravity: Some([g[0], g[1], g[2]]),
            links: chain
                .links()
                .iter()
                .map(|l| LinkEntry {
                    mass: l.mass,
                    com: l.com.into(),
                    inertia: l.inertia_components(),
                    axis: l.axis.into(),
                    offset: l.offset.into(),
                    friction: Some(FrictionEntry {
                        viscous: l.viscous,
                        coulomb: l.coulomb,
                        slope: l.slope,
                    }),
                })
                .collect(),
        }
    }

    pub fn into_chain(self, default_name: &str) -> Result<ChainModel<f64>> {
        let links = self
            .links
            .into_iter()
            .map(|l| {
                let fr = l.friction.unwrap_or(FrictionEntry {
                    viscous: 0.0,
                    coulomb: 0.0,
                    slope: 1.0,
                });
                LinkParams {
                    mass: l.mass,
                    com: v3(l.com),
                    inertia: LinkParams::inertia_from_components(l.inertia),
                    axis: v3(l.axis),
                    offset: v3(l.offset),
                    viscous: fr.viscous,
                    coulomb: fr.coulomb,
                    slope: fr.slope,
                }
            })
            .collect();
        ChainModel::new(
            self.name.unwrap_or_else(|| default_name.to_string()),
            v3(self.gravity.unwrap_or([0.0, 0.0, -crate::chain::STANDARD_GRAVITY])),
            links,
        )
    }
}

/// Parses and validates a robot description.
pub fn load_chain(text: &str) -> Result<ChainModel<f64>> {
    load_chain_named(text, "<robot>")
}

fn load_chain_named(text: &str, source: &str) -> Result<ChainModel<f64>> {
    let doc: RobotDocument = parse(text, source)?;
    doc.into_chain("robot").map_err(|e| config_error(source, e.to_string()))
}

pub fn serialize_chain(chain: &ChainModel<f64>) -> String {
    toml::to_string(&RobotDocument::from_chain(chain)).expect("robot document serializes")
}

/// Resolves a `--robot` argument: `builtin:7dof` or a file path.
pub fn resolve_robot(spec: &str) -> Result<ChainModel<f64>> {
    if spec == BUILTIN_ROBOT {
        return Ok(canonical_7dof());
    }
    if let Some(other) = spec.strip_prefix("builtin:") {
        return Err(config_error(spec, format!("unknown built-in robot '{other}'")));
    }
    let text = read_file(Path::new(spec))?;
    load_chain_named(&text, spec)
}

/// Damping weights of the `builtin:tuned` profile.
pub const TUNED_DAMPING: [f64; 7] = [105.0, 102.0, 3.9, 20.0, 1.3, 0.98, 0.33];
/// Muscle stiffness coefficients of the `builtin:tuned` profile.
pub const TUNED_STIFFNESS: [f64; 7] = [1100.0, 1070.0, 42.0, 213.0, 13.5, 10.4, 3.4];
/// Filter time constant of the `builtin:tuned` profile (s).
pub const TUNED_TAU: f64 = 0.0043;

/// Gains retuned for the built-in arm, which has only its bare link
/// inertias.
///
/// The reference gains leave the filtered damping loop of the light distal
/// joints nearly undamped. Here each `C_i` is proportional to the joint's
/// home-pose inertia and `f_i = 3 C_i`, scaled so that the slow final
/// approach (where the spring weight fades as `cos`) ends within 10 s.
/// The price is a very fast main movement.
pub fn tuned_profile() -> ControllerParams<f64> {
    let v = |a: &[f64]| DVector::from_column_slice(a);
    ControllerParams {
        damping: v(&TUNED_DAMPING),
        stiffness: v(&TUNED_STIFFNESS),
        tau: DVector::from_element(7, TUNED_TAU),
        ..ControllerParams::published()
    }
}

fn vector_or_default(
    value: Option<Vec<f64>>,
    default: Option<Vec<f64>>,
    path: &str,
    dof: usize,
    source: &str,
    defaulted: &mut Vec<String>,
) -> Result<DVector<f64>> {
    let v = match (value, default) {
        (Some(v), _) => v,
        (None, Some(d)) => {
            defaulted.push(path.to_string());
            d
        }
        (None, None) => {
            return Err(config_error(
                source,
                format!("missing {path} (defaults exist only for 7-joint arms)"),
            ))
        }
    };
    if v.len() != dof {
        return Err(config_error(
            source,
            format!("{path} has {} entries, robot has {dof} joints", v.len()),
        ));
    }
    Ok(DVector::from_vec(v))
}

impl ControllerEntry {
    pub fn from_params(p: &ControllerParams<f64>) -> Self {
        Self {
            C: Some(p.damping.as_slice().to_vec()),
            f: Some(p.stiffness.as_slice().to_vec()),
            tau: Some(p.tau.as_slice().to_vec()),
            k: Some(p.spring),
            target: Some(p.target.into()),
            observer: Some(ObserverEntry {
                enabled: Some(p.observer.enabled),
                cutoff: Some(p.observer.cutoff),
            }),
        }
    }

    /// Applies defaults (the reference gains for 7-joint arms) and validates.
    pub fn resolve(self, dof: usize, source: &str) -> Result<Resolved<ControllerParams<f64>>> {
        let base = ControllerParams::<f64>::published();
        let seven = dof == 7;
        let d = |v: &DVector<f64>| seven.then(|| v.as_slice().to_vec());
        let mut defaulted = Vec::new();
        let damping = vector_or_default(self.C, d(&base.damping), "controller.C", dof, source, &mut defaulted)?;
        let stiffness = vector_or_default(self.f, d(&base.stiffness), "controller.f", dof, source, &mut defaulted)?;
        let tau = vector_or_default(
            self.tau,
            Some(vec![PUBLISHED_TAU; dof]),
            "controller.tau",
            dof,
            source,
            &mut defaulted,
        )?;
        let spring = self.k.unwrap_or_else(|| {
            defaulted.push("controller.k".into());
            base.spring
        });
        let target = self.target.map(v3).unwrap_or_else(|| {
            defaulted.push("controller.target".into());
            base.target
        });
        let obs = self.observer.unwrap_or_default();
        let enabled = obs.enabled.unwrap_or_else(|| {
            defaulted.push("controller.observer.enabled".into());
            false
        });
        let cutoff = obs.cutoff.unwrap_or_else(|| {
            defaulted.push("controller.observer.cutoff".into());
            DEFAULT_OBSERVER_CUTOFF
        });
        let value = ControllerParams {
            damping,
            stiffness,
            tau,
            spring,
            target,
            observer: ObserverParams { enabled, cutoff },
        };
        value.validate().map_err(|e| config_error(source, e.to_string()))?;
        Ok(Resolved { value, defaulted })
    }
}

pub fn load_controller(text: &str, dof: usize) -> Result<Resolved<ControllerParams<f64>>> {
    let doc: ControllerDocument = parse(text, "<controller>")?;
    doc.controller.resolve(dof, "<controller>")
}

/// Resolves a `--controller` argument: a built-in profile or a file path.
pub fn resolve_controller(spec: &str, dof: usize) -> Result<Resolved<ControllerParams<f64>>> {
    let builtin = match spec {
        BUILTIN_PUBLISHED => Some(ControllerParams::published()),
        BUILTIN_TUNED => Some(tuned_profile()),
        s if s.starts_with("builtin:") => {
            return Err(config_error(spec, "unknown built-in controller profile"))
        }
        _ => None,
    };
    if let Some(p) = builtin {
        if dof != 7 {
            return Err(config_error(spec, "built-in profiles need a 7-joint robot"));
        }
        return Ok(Resolved {
            value: p,
            defaulted: Vec::new(),
        });
    }
    let text = read_file(Path::new(spec))?;
    let doc: ControllerDocument = parse(&text, spec)?;
    doc.controller.resolve(dof, spec)
}

impl SimulationEntry {
    pub fn from_config(c: &SimConfig<f64>) -> Self {
        Self {
            dt: Some(c.dt),
            max_time: Some(c.max_time),
            initial_q: c.initial_q.as_ref().map(|q| q.as_slice().to_vec()),
            tolerances: Some(TolerancesEntry {
                position: Some(c.stop_position_tol),
                speed: Some(c.stop_speed_tol),
            }),
            toggles: Some(TogglesEntry {
                friction: Some(c.friction_on),
                gravity_comp: Some(c.gravity_comp_on),
                observer: Some(c.observer_on),
            }),
            disturbance: c
                .disturbances
                .iter()
                .map(|d| DisturbanceEntry {
                    joint: d.joint,
                    torque: d.torque,
                    t0: d.t0,
                    t1: d.t1,
                })
                .collect(),
            perturbation: Some(PerturbationEntry {
                mass: Some(c.mass_perturbation),
            }),
            plant_substeps: Some(c.plant_substeps),
        }
    }

    /// Applies defaults; `observer_default` comes from the controller's
    /// `observer.enabled`.
    pub fn resolve(self, dof: usize, observer_default: bool, source: &str) -> Result<Resolved<SimConfig<f64>>> {
        let base = SimConfig::<f64>::default();
        let mut defaulted = Vec::new();
        let mut pick = |v: Option<f64>, d: f64, path: &str| {
            v.unwrap_or_else(|| {
                defaulted.push(path.to_string());
                d
            })
        };
        let dt = pick(self.dt, base.dt, "simulation.dt");
        let max_time = pick(self.max_time, base.max_time, "simulation.max_time");
        let tol = self.tolerances.unwrap_or_default();
        let stop_position_tol = pick(tol.position, base.stop_position_tol, "simulation.tolerances.position");
        let stop_speed_tol = pick(tol.speed, base.stop_speed_tol, "simulation.tolerances.speed");
        let mass_perturbation = pick(
            self.perturbation.unwrap_or_default().mass,
            0.0,
            "simulation.perturbation.mass",
        );
        let toggles = self.toggles.unwrap_or_default();
        let mut flag = |v: Option<bool>, d: bool, path: &str| {
            v.unwrap_or_else(|| {
                defaulted.push(path.to_string());
                d
            })
        };
        let friction_on = flag(toggles.friction, true, "simulation.toggles.friction");
        let gravity_comp_on = flag(toggles.gravity_comp, true, "simulation.toggles.gravity_comp");
        let observer_on = flag(toggles.observer, observer_default, "simulation.toggles.observer");
        if self.initial_q.is_none() {
            defaulted.push("simulation.initial_q".into());
        }
        let plant_substeps = self.plant_substeps.unwrap_or_else(|| {
            defaulted.push("simulation.plant_substeps".into());
            base.plant_substeps
        });
        let value = SimConfig {
            dt,
            max_time,
            initial_q: self.initial_q.map(DVector::from_vec),
            stop_position_tol,
            stop_speed_tol,
            friction_on,
            gravity_comp_on,
            observer_on,
            disturbances: self
                .disturbance
                .into_iter()
                .map(|d| Disturbance {
                    joint: d.joint,
                    torque: d.torque,
                    t0: d.t0,
                    t1: d.t1,
                })
                .collect(),
            mass_perturbation,
            plant_substeps,
        };
        value.validate(dof).map_err(|e| config_error(source, e.to_string()))?;
        Ok(Resolved { value, defaulted })
    }
}

pub fn load_scenario(text: &str, dof: usize, observer_default: bool) -> Result<Resolved<SimConfig<f64>>> {
    let doc: ScenarioDocument = parse(text, "<scenario>")?;
    doc.simulation.resolve(dof, observer_default, "<scenario>")
}

pub fn resolve_scenario(path: Option<&str>, dof: usize, observer_default: bool) -> Result<Resolved<SimConfig<f64>>> {
    match path {
        None => SimulationEntry::default().resolve(dof, observer_default, "<defaults>"),
        Some(p) => {
            let text = read_file(Path::new(p))?;
            let doc: ScenarioDocument = parse(&text, p)?;
            doc.simulation.resolve(dof, observer_default, p)
        }
    }
}

/// Inertia helper used by tests and documents: diagonal tensor.
pub fn diagonal_inertia(xx: f64, yy: f64, zz: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(xx, yy, zz))
}
