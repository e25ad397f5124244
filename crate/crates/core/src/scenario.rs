//! Scenario files: a TOML document that fully determines one run.
//!
//! Every physical quantity carries its unit in the key name (`dt_s`,
//! `inertia_kg_m2`, ...). See `scenarios/paper_default.toml` for the complete
//! key table.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;
use thiserror::Error;

use crate::critic::{Weights, BASIS_DIM};
use crate::dynamics::{DynamicsError, InertiaMatrix, RigidBodyState};
use crate::graph::{GraphError, Topology};
use crate::sim::{AgentConfig, ConfigError, SimConfig, WeightInit};
use crate::trigger::{TriggerMode, TriggerParams};
use crate::Matrix6;

/// Name under which the built-in default scenario can be referenced.
pub const PAPER_DEFAULT_NAME: &str = "paper_default";

/// Source text of the built-in default scenario.
pub const PAPER_DEFAULT_TOML: &str = include_str!("../scenarios/paper_default.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario '{path}': {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid field '{field}': {reason}")]
    Field { field: String, reason: String },
    #[error("invalid topology: {0}")]
    Topology(#[from] GraphError),
    #[error("agent {agent}: invalid inertia: {source}")]
    Inertia { agent: usize, source: DynamicsError },
    #[error("validation failed: {0}")]
    Validation(#[from] ConfigError),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub config: SimConfig<f64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    output_dir: PathBuf,
    sim: SimSection,
    topology: TopologySection,
    controller: ControllerSection,
    trigger: TriggerSection,
    agent: Vec<AgentSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    dt_s: f64,
    t_final_s: f64,
    integrator: String,
    trigger_mode: String,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    adjacency: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    alpha_per_s: f64,
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    learning_rate: f64,
    updates_per_event: usize,
    weight_init: String,
    weight_init_half_width: Option<f64>,
    initial_weights: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerSection {
    y0: f64,
    gamma_per_s: f64,
    kappa: f64,
    varpi: f64,
    theta_s: f64,
    lipschitz_p: f64,
    x_m_per_s: f64,
    y_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSection {
    inertia_kg_m2: Vec<Vec<f64>>,
    sigma0: Vec<f64>,
    omega0_rad_s: Vec<f64>,
    tau0_n_m: Vec<f64>,
    alpha_per_s: Option<f64>,
    learning_rate: Option<f64>,
}

fn field(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Field { field: field.into(), reason: reason.into() }
}

fn vec3(name: &str, v: &[f64]) -> Result<Vector3<f64>, ScenarioError> {
    if v.len() != 3 {
        return Err(field(name, format!("expected 3 entries, found {}", v.len())));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn square<const D: usize>(name: &str, rows: &[Vec<f64>]) -> Result<nalgebra::SMatrix<f64, D, D>, ScenarioError> {
    if rows.len() != D || rows.iter().any(|r| r.len() != D) {
        return Err(field(name, format!("expected a {D}x{D} matrix")));
    }
    Ok(nalgebra::SMatrix::from_fn(|r, c| rows[r][c]))
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if file.name.trim().is_empty() {
        return Err(field("name", "must be nonempty"));
    }
    let topology = Topology::from_rows(&file.topology.adjacency)?;

    let c = &file.controller;
    let q: Matrix6<f64> = square("controller.q", &c.q)?;
    let r: Matrix3<f64> = square("controller.r", &c.r)?;
    let weight_init = match c.weight_init.as_str() {
        "zeros" => WeightInit::Zeros,
        "uniform" => WeightInit::Uniform {
            half_width: c
                .weight_init_half_width
                .ok_or_else(|| field("controller.weight_init_half_width", "required when weight_init = \"uniform\""))?,
        },
        "explicit" => {
            let w = c
                .initial_weights
                .as_ref()
                .ok_or_else(|| field("controller.initial_weights", "required when weight_init = \"explicit\""))?;
            if w.len() != BASIS_DIM {
                return Err(field("controller.initial_weights", format!("expected {BASIS_DIM} entries, found {}", w.len())));
            }
            WeightInit::Explicit(Weights::from_column_slice(w))
        }
        other => return Err(field("controller.weight_init", format!("unknown value '{other}' (zeros, uniform, explicit)"))),
    };

    let t = &file.trigger;
    let trigger = TriggerParams {
        gamma: t.gamma_per_s,
        kappa: t.kappa,
        varpi: t.varpi,
        theta: t.theta_s,
        lipschitz_p: t.lipschitz_p,
        y0: t.y0,
        x_m: t.x_m_per_s,
        y_m: t.y_m,
    };

    let agents = file
        .agent
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let inertia = InertiaMatrix::new(square(&format!("agent[{i}].inertia_kg_m2"), &a.inertia_kg_m2)?)
                .map_err(|source| ScenarioError::Inertia { agent: i + 1, source })?;
            Ok(AgentConfig {
                inertia,
                alpha: a.alpha_per_s.unwrap_or(c.alpha_per_s),
                q,
                r,
                learning_rate: a.learning_rate.unwrap_or(c.learning_rate),
                trigger,
                initial: RigidBodyState::new(
                    vec3(&format!("agent[{i}].sigma0"), &a.sigma0)?,
                    vec3(&format!("agent[{i}].omega0_rad_s"), &a.omega0_rad_s)?,
                    vec3(&format!("agent[{i}].tau0_n_m"), &a.tau0_n_m)?,
                ),
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;

    let config = SimConfig {
        topology,
        agents,
        trigger_mode: file.sim.trigger_mode.parse::<TriggerMode>().map_err(|e| field("sim.trigger_mode", e))?,
        dt: file.sim.dt_s,
        t_final: file.sim.t_final_s,
        integrator: file.sim.integrator.parse().map_err(|e: String| field("sim.integrator", e))?,
        seed: file.sim.seed,
        weight_init,
        updates_per_event: c.updates_per_event,
    };
    config.validate()?;
    Ok(Scenario { name: file.name, config, output_dir: file.output_dir })
}

/// Loads a scenario from a file, or the built-in default when `path` is
/// `paper_default` and no such file exists.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    if !path.exists() && path.as_os_str() == PAPER_DEFAULT_NAME {
        return parse_scenario(PAPER_DEFAULT_TOML);
    }
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text)
}

/// The built-in default scenario.
pub fn paper_default() -> Scenario {
    parse_scenario(PAPER_DEFAULT_TOML).expect("shipped scenario is valid")
}
