//! Run summaries and their two serializations: JSON and a flat `key = value` text report.
//!
//! The text report is the JSON document flattened to dotted paths (array
//! elements use their 0-based position), one `path = <json scalar>` per line.
//! Lines starting with `#` are comments.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::trace::Trace;
use crate::scalar::Scalar;
use crate::trigger::TriggerMode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trace has no records")]
    EmptyTrace,
    #[error("metrics parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    /// 1-based agent index.
    pub agent: usize,
    pub event_count: usize,
    /// Smallest inter-event time (s); the full horizon when fewer than two events occurred.
    pub min_interval_s: f64,
    /// Analytic inter-event lower bound evaluated right after the first event (s).
    pub first_zeno_bound_s: Option<f64>,
    pub final_delta_norm: f64,
    /// `‖σ_1(T) − σ_i(T)‖`.
    pub final_attitude_error: f64,
    /// `‖ω_1(T) − ω_i(T)‖` (rad/s).
    pub final_rate_error: f64,
    pub total_cost: f64,
    pub messages_sent: u64,
    pub state_reads: u64,
    pub max_weight_norm: f64,
    pub min_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: TriggerMode,
    pub integrator: String,
    pub seed: u64,
    pub dt_s: f64,
    pub t_final_s: f64,
    pub n_agents: usize,
    pub agents: Vec<AgentMetrics>,
    pub total_events: usize,
    pub total_messages: u64,
    pub total_state_reads: u64,
    /// Broadcasts plus neighbor-state reads.
    pub total_communication: u64,
    pub total_cost: f64,
    pub max_state_norm: f64,
    pub max_weight_norm: f64,
    pub min_y: f64,
    pub warnings: Vec<String>,
}

/// Summarizes a trace.
pub fn metrics<T: Scalar>(trace: &Trace<T>) -> Result<MetricsReport, MetricsError> {
    let last = trace.records.last().ok_or(MetricsError::EmptyTrace)?;
    let first = &last.agents[0];
    let horizon = trace.meta.t_final;
    let n = trace.meta.n_agents;

    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let steps: Vec<usize> = trace.records.iter().filter(|r| r.agents[i].event).map(|r| r.step).collect();
        let min_gap = steps.windows(2).map(|w| w[1] - w[0]).min();
        let fin = &last.agents[i];
        let (max_w, min_y) = trace.records.iter().fold((0.0f64, f64::INFINITY), |(w, y), r| {
            (w.max(r.agents[i].w_norm.as_f64()), y.min(r.agents[i].y.as_f64()))
        });
        agents.push(AgentMetrics {
            agent: i + 1,
            event_count: steps.len(),
            min_interval_s: min_gap.map_or(horizon, |g| g as f64 * trace.meta.dt),
            first_zeno_bound_s: trace.events.get(i).and_then(|ev| ev.first()).map(|e| e.zeno_bound.as_f64()),
            final_delta_norm: fin.delta_norm.as_f64(),
            final_attitude_error: (first.sigma - fin.sigma).norm().as_f64(),
            final_rate_error: (first.omega - fin.omega).norm().as_f64(),
            total_cost: fin.cost.as_f64(),
            messages_sent: fin.msgs,
            state_reads: trace.state_reads.get(i).copied().unwrap_or(0),
            max_weight_norm: max_w,
            min_y,
        });
    }

    let max_state_norm = trace
        .records
        .iter()
        .flat_map(|r| r.agents.iter())
        .map(|a| a.sigma.norm().max(a.omega.norm()).max(a.tau.norm()).as_f64())
        .fold(0.0, f64::max);
    let total_messages: u64 = agents.iter().map(|a| a.messages_sent).sum();
    let total_state_reads: u64 = agents.iter().map(|a| a.state_reads).sum();
    Ok(MetricsReport {
        mode: trace.meta.mode,
        integrator: trace.meta.integrator.to_string(),
        seed: trace.meta.seed,
        dt_s: trace.meta.dt,
        t_final_s: horizon,
        n_agents: n,
        total_events: agents.iter().map(|a| a.event_count).sum(),
        total_messages,
        total_state_reads,
        total_communication: total_messages + total_state_reads,
        total_cost: agents.iter().map(|a| a.total_cost).sum(),
        max_state_norm,
        max_weight_norm: agents.iter().map(|a| a.max_weight_norm).fold(0.0, f64::max),
        min_y: agents.iter().map(|a| a.min_y).fold(f64::INFINITY, f64::min),
        agents,
        warnings: trace.warnings.clone(),
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(s).map_err(|e| MetricsError::Parse(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("metrics serialize");
        let mut out = String::from("# rigid-consensus metrics\n");
        flatten("", &value, &mut out);
        out
    }

    pub fn from_text(s: &str) -> Result<Self, MetricsError> {
        let mut root = Value::Object(Map::new());
        let mut any = false;
        for (n, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once(" = ")
                .ok_or_else(|| MetricsError::Parse(format!("line {}: expected 'key = value'", n + 1)))?;
            let value: Value = serde_json::from_str(raw)
                .map_err(|e| MetricsError::Parse(format!("line {}: {e}", n + 1)))?;
            insert_path(&mut root, key, value).map_err(|e| MetricsError::Parse(format!("line {}: {e}", n + 1)))?;
            any = true;
        }
        if !any {
            return Err(MetricsError::Parse("no entries".into()));
        }
        serde_json::from_value(root).map_err(|e| MetricsError::Parse(e.to_string()))
    }

    /// Parses either serialization.
    pub fn parse(s: &str) -> Result<Self, MetricsError> {
        if s.trim_start().starts_with('{') {
            Self::from_json(s)
        } else {
            Self::from_text(s)
        }
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut String) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        // Empty arrays are kept as a literal so they survive the round trip.
        Value::Array(items) if items.is_empty() => out.push_str(&format!("{prefix} = []\n")),
        Value::Array(items) => {
            for (k, v) in items.iter().enumerate() {
                flatten(&join(&k.to_string()), v, out);
            }
        }
        scalar => out.push_str(&format!("{prefix} = {scalar}\n")),
    }
}

fn insert_path(root: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (depth, part) in parts.iter().enumerate() {
        let leaf = depth + 1 == parts.len();
        let next_is_index = parts.get(depth + 1).is_some_and(|p| p.parse::<usize>().is_ok());
        let fresh = || if next_is_index { Value::Array(Vec::new()) } else { Value::Object(Map::new()) };
        node = match node {
            Value::Object(map) => {
                if leaf {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(fresh)
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| format!("'{part}' is not an index"))?;
                if idx > items.len() {
                    return Err(format!("index {idx} skips entries"));
                }
                if leaf {
                    if idx == items.len() {
                        items.push(value);
                    } else {
                        items[idx] = value;
                    }
                    return Ok(());
                }
                if idx == items.len() {
                    items.push(fresh());
                }
                &mut items[idx]
            }
            _ => return Err(format!("'{path}' conflicts with an earlier scalar")),
        };
    }
    Err(format!("empty key '{path}'"))
}
