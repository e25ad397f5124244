//! In-memory run trace and its CSV serialization.
//!
//! CSV layout: one header row, then one row per record. The first column is
//! `t`; it is followed by one block per agent (1-based index `k`) with the
//! columns of [`TRACE_AGENT_COLUMNS`], each named `a{k}_{column}`.

use std::io::{self, BufRead, Write};

use nalgebra::Vector3;

use super::config::Integrator;
use crate::scalar::Scalar;
use crate::trigger::TriggerMode;

/// Per-agent CSV columns, in order.
pub const TRACE_AGENT_COLUMNS: [&str; 24] = [
    "sigma_1",
    "sigma_2",
    "sigma_3",
    "omega_1",
    "omega_2",
    "omega_3",
    "tau_1",
    "tau_2",
    "tau_3",
    "delta_1",
    "delta_2",
    "delta_3",
    "delta_norm",
    "u_1",
    "u_2",
    "u_3",
    "y",
    "event",
    "w_norm",
    "cost",
    "msgs",
    "meas_err",
    "self_bound",
    "self_threshold",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub n_agents: usize,
    pub dt: f64,
    pub t_final: f64,
    pub mode: TriggerMode,
    pub integrator: Integrator,
    pub seed: u64,
}

/// One agent's quantities at a record instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSample<T: Scalar> {
    pub sigma: Vector3<T>,
    pub omega: Vector3<T>,
    pub tau: Vector3<T>,
    pub delta: Vector3<T>,
    pub delta_norm: T,
    /// Held control after any event at this instant.
    pub u: Vector3<T>,
    /// `y_i(t)` as used by the trigger test at this instant.
    pub y: T,
    pub event: bool,
    /// `‖Ŵ_c,i‖` after any update at this instant.
    pub w_norm: T,
    /// `∫₀ᵗ (eᵀQe + ûᵀRû) ds`.
    pub cost: T,
    /// Cumulative control broadcasts sent by this agent.
    pub msgs: u64,
    /// `‖E_i(t)‖` against the snapshot in force before any event at this instant.
    pub meas_err: T,
    /// `‖Δ_i(t)‖` from the same snapshot.
    pub self_bound: T,
    /// Right-hand side of the self-triggered test at `t`.
    pub self_threshold: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T: Scalar> {
    pub step: usize,
    pub t: T,
    pub agents: Vec<AgentSample<T>>,
}

/// One trigger instant of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord<T: Scalar> {
    pub step: usize,
    pub t: T,
    /// `V̂(e)` with the weights before the update.
    pub value_before: T,
    /// `V̂(e)` with the updated weights.
    pub value: T,
    /// Hamiltonian residual that drove the update.
    pub residual: T,
    pub w_norm: T,
    pub control: Vector3<T>,
    /// Analytic lower bound on the next inter-event time.
    pub zeno_bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T: Scalar> {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord<T>>,
    /// Trigger instants per agent.
    pub events: Vec<Vec<EventRecord<T>>>,
    /// Neighbor-state reads per agent (continuous monitoring in dynamic / periodic mode).
    pub state_reads: Vec<u64>,
    pub warnings: Vec<String>,
}

/// Header row for `n_agents` agents.
pub fn trace_header(n_agents: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for k in 1..=n_agents {
        cols.extend(TRACE_AGENT_COLUMNS.iter().map(|c| format!("a{k}_{c}")));
    }
    cols
}

fn push_vec<T: Scalar>(out: &mut Vec<String>, v: &Vector3<T>) {
    out.extend(v.iter().map(|x| x.to_string()));
}

/// Writes the trace as CSV. Reals use Rust's shortest round-trip formatting.
pub fn write_trace_csv<T: Scalar, W: Write>(trace: &Trace<T>, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", trace_header(trace.meta.n_agents).join(","))?;
    let mut row = Vec::with_capacity(1 + TRACE_AGENT_COLUMNS.len() * trace.meta.n_agents);
    for rec in &trace.records {
        row.clear();
        row.push(rec.t.to_string());
        for a in &rec.agents {
            push_vec(&mut row, &a.sigma);
            push_vec(&mut row, &a.omega);
            push_vec(&mut row, &a.tau);
            push_vec(&mut row, &a.delta);
            row.push(a.delta_norm.to_string());
            push_vec(&mut row, &a.u);
            row.push(a.y.to_string());
            row.push(if a.event { "1" } else { "0" }.to_string());
            row.push(a.w_norm.to_string());
            row.push(a.cost.to_string());
            row.push(a.msgs.to_string());
            row.push(a.meas_err.to_string());
            row.push(a.self_bound.to_string());
            row.push(a.self_threshold.to_string());
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// A parsed trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn n_agents(&self) -> usize {
        (self.header.len() - 1) / TRACE_AGENT_COLUMNS.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Value of `column` for 1-based agent `agent` in row `row`.
    pub fn agent_value(&self, row: usize, agent: usize, column: &str) -> Option<f64> {
        let offset = TRACE_AGENT_COLUMNS.iter().position(|c| *c == column)?;
        self.rows.get(row)?.get(1 + (agent - 1) * TRACE_AGENT_COLUMNS.len() + offset).copied()
    }
}

/// Parses and schema-checks a trace CSV.
pub fn parse_trace_csv<R: BufRead>(r: R) -> Result<TraceTable, String> {
    let mut lines = r.lines();
    let header_line = lines.next().ok_or("empty trace file")?.map_err(|e| e.to_string())?;
    let header: Vec<String> = header_line.split(',').map(str::to_string).collect();
    let width = header.len();
    if width < 1 + TRACE_AGENT_COLUMNS.len() || (width - 1) % TRACE_AGENT_COLUMNS.len() != 0 {
        return Err(format!("header has {width} columns, not 1 + 24·n"));
    }
    let expected = trace_header((width - 1) / TRACE_AGENT_COLUMNS.len());
    if header != expected {
        let bad = header.iter().zip(&expected).position(|(a, b)| a != b).unwrap_or(0);
        return Err(format!("unexpected column '{}' at position {}, expected '{}'", header[bad], bad, expected[bad]));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|e| format!("line {}: {e}", n + 2))?;
        if row.len() != width {
            return Err(format!("line {}: {} fields, expected {width}", n + 2, row.len()));
        }
        rows.push(row);
    }
    Ok(TraceTable { header, rows })
}
