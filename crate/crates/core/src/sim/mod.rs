//! Closed-loop simulation: configuration, the stepping engine, traces and metrics.

mod config;
mod engine;
mod metrics;
mod trace;

pub use config::{AgentConfig, ConfigError, Integrator, SimConfig, WeightInit};
pub use engine::{accumulate_cost, run, sweep, SimError};
pub use metrics::{metrics, AgentMetrics, MetricsError, MetricsReport};
pub use trace::{
    parse_trace_csv, trace_header, write_trace_csv, AgentSample, EventRecord, Trace, TraceMeta, TraceRecord,
    TraceTable, TRACE_AGENT_COLUMNS,
};
