//! Command-line front end.
//!
//! ```text
//! rigid-consensus run <SCENARIO> [--mode M] [--seed N] [--out DIR] [--dt S] [--t-final S]
//! rigid-consensus sweep <SCENARIO> [--mode M,...] [--seed N,...] [--gamma G,...] [--out DIR]
//! rigid-consensus compare <METRICS_A> <METRICS_B>
//! rigid-consensus validate <SCENARIO>
//! ```
//!
//! `<SCENARIO>` is a TOML file, or `paper_default` for the built-in scenario.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::scenario::{load_scenario, Scenario, ScenarioError};
use crate::sim::{metrics, run, sweep, write_trace_csv, MetricsReport, SimConfig, SimError};
use crate::trigger::TriggerMode;

pub const EXIT_OK: i32 = 0;
/// Command-line usage error (as reported by the argument parser).
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
/// The simulation aborted (non-finite state).
pub const EXIT_RUNTIME: i32 = 4;
pub const EXIT_IO: i32 = 5;
/// Metrics files could not be parsed or describe different agent sets.
pub const EXIT_COMPARE: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "rigid-consensus", version, about = "Attitude consensus of rigid bodies with event-triggered critic learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace and metrics.
    Run(RunArgs),
    /// Run a grid of modes, seeds and decay rates in parallel.
    Sweep(SweepArgs),
    /// Compare two metrics files side by side.
    Compare { a: PathBuf, b: PathBuf },
    /// Load and validate a scenario without running it.
    Validate { scenario: PathBuf },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Output directory (defaults to the scenario's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step size override (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon override (s).
    #[arg(long = "t-final")]
    t_final: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    mode: Option<TriggerMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct SweepArgs {
    scenario: PathBuf,
    #[arg(long, value_delimiter = ',')]
    mode: Vec<TriggerMode>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Values of the trigger decay rate gamma (1/s), applied to every agent.
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = if matches!(e, ScenarioError::Io { .. }) { EXIT_IO } else { EXIT_CONFIG };
        Self::new(code, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Config(_) => EXIT_CONFIG,
            SimError::NonFinite { .. } => EXIT_RUNTIME,
        };
        Self::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Entry point used by the binary.
pub fn main_entry() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_cli(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (including the program name) and executes the command,
/// returning the process exit code.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, out),
        Command::Sweep(args) => cmd_sweep(&args, out),
        Command::Compare { a, b } => cmd_compare(&a, &b, out),
        Command::Validate { scenario } => cmd_validate(&scenario, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn apply_overrides(scenario: &mut Scenario, o: &Overrides) -> PathBuf {
    if let Some(dt) = o.dt {
        scenario.config.dt = dt;
    }
    if let Some(t) = o.t_final {
        scenario.config.t_final = t;
    }
    o.out.clone().unwrap_or_else(|| scenario.output_dir.clone())
}

/// Paths of the files written by `run` for one mode.
pub fn output_paths(dir: &Path, mode: TriggerMode) -> [PathBuf; 3] {
    [
        dir.join(format!("trace-{mode}.csv")),
        dir.join(format!("metrics-{mode}.json")),
        dir.join(format!("metrics-{mode}.txt")),
    ]
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut scenario = load_scenario(&args.scenario)?;
    let dir = apply_overrides(&mut scenario, &args.overrides);
    let mut cfg = scenario.config;
    if let Some(mode) = args.mode {
        cfg = cfg.with_mode(mode);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let trace = run(&cfg)?;
    let report = metrics(&trace).expect("a completed run has records");

    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let [trace_path, json_path, text_path] = output_paths(&dir, cfg.trigger_mode);
    let file = File::create(&trace_path).map_err(|e| io_failure(&trace_path, e))?;
    let mut w = BufWriter::new(file);
    write_trace_csv(&trace, &mut w).and_then(|_| w.flush()).map_err(|e| io_failure(&trace_path, e))?;
    write_file(&json_path, &report.to_json())?;
    write_file(&text_path, &report.to_text())?;

    let _ = writeln!(out, "{}: {} mode, {} steps", scenario.name, cfg.trigger_mode, cfg.n_steps());
    let _ = writeln!(out, "{:>5} {:>7} {:>12} {:>12}", "agent", "events", "min_int_s", "final_|d|");
    for a in &report.agents {
        let _ = writeln!(
            out,
            "{:>5} {:>7} {:>12.4} {:>12.3e}",
            a.agent, a.event_count, a.min_interval_s, a.final_delta_norm
        );
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out, "wrote {}", trace_path.display());
    let _ = writeln!(out, "wrote {}", json_path.display());
    let _ = writeln!(out, "wrote {}", text_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    mode: TriggerMode,
    seed: u64,
    gamma: Option<f64>,
    metrics: Option<MetricsReport>,
    error: Option<String>,
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut scenario = load_scenario(&args.scenario)?;
    let dir = apply_overrides(&mut scenario, &args.overrides);
    let base = scenario.config;
    base.validate().map_err(|e| Failure::from(SimError::from(e)))?;
    let modes = if args.mode.is_empty() { vec![base.trigger_mode] } else { args.mode.clone() };
    let seeds = if args.seed.is_empty() { vec![base.seed] } else { args.seed.clone() };
    let gammas: Vec<Option<f64>> =
        if args.gamma.is_empty() { vec![None] } else { args.gamma.iter().copied().map(Some).collect() };

    let mut grid = Vec::new();
    let mut cfgs: Vec<SimConfig<f64>> = Vec::new();
    for &mode in &modes {
        for &seed in &seeds {
            for &gamma in &gammas {
                let mut cfg = base.clone().with_mode(mode);
                cfg.seed = seed;
                if let Some(g) = gamma {
                    for a in &mut cfg.agents {
                        a.trigger.gamma = g;
                    }
                }
                grid.push((mode, seed, gamma));
                cfgs.push(cfg);
            }
        }
    }
    let results = sweep(&cfgs);

    let _ = writeln!(out, "{:>9} {:>6} {:>7} {:>8} {:>10} {:>12}", "mode", "seed", "gamma", "events", "comm", "cost");
    let mut entries = Vec::with_capacity(results.len());
    for ((mode, seed, gamma), result) in grid.into_iter().zip(results) {
        let gamma_text = gamma.map_or_else(|| "-".to_string(), |g| g.to_string());
        match result {
            Ok(m) => {
                let _ = writeln!(
                    out,
                    "{:>9} {:>6} {:>7} {:>8} {:>10} {:>12.4}",
                    mode.to_string(),
                    seed,
                    gamma_text,
                    m.total_events,
                    m.total_communication,
                    m.total_cost
                );
                entries.push(SweepEntry { mode, seed, gamma, metrics: Some(m), error: None });
            }
            Err(e) => {
                let _ = writeln!(out, "{:>9} {:>6} {:>7} error: {e}", mode.to_string(), seed, gamma_text);
                entries.push(SweepEntry { mode, seed, gamma, metrics: None, error: Some(e.to_string()) });
            }
        }
    }
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let path = dir.join("sweep.json");
    write_file(&path, &serde_json::to_string_pretty(&entries).expect("sweep serialize"))?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

fn read_metrics(path: &Path) -> Result<MetricsReport, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    MetricsReport::parse(&text).map_err(|e| Failure::new(EXIT_COMPARE, format!("{}: {e}", path.display())))
}

/// Side-by-side table of two metrics reports. Fails when they cover different agents.
pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<String, String> {
    let ids = |m: &MetricsReport| m.agents.iter().map(|x| x.agent).collect::<Vec<_>>();
    if ids(a) != ids(b) {
        return Err(format!("agent sets differ: {:?} vs {:?}", ids(a), ids(b)));
    }
    let mut s = String::new();
    let _ = writeln!(s, "A = {} mode, B = {} mode", a.mode, b.mode);
    let _ = writeln!(
        s,
        "{:>5} {:>8} {:>8} {:>8} {:>10} {:>10} {:>12} {:>12}",
        "agent", "events_A", "events_B", "delta", "min_int_A", "min_int_B", "cost_A", "cost_B"
    );
    for (x, y) in a.agents.iter().zip(&b.agents) {
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:>8} {:>8} {:>10.4} {:>10.4} {:>12.4} {:>12.4}",
            x.agent,
            x.event_count,
            y.event_count,
            y.event_count as i64 - x.event_count as i64,
            x.min_interval_s,
            y.min_interval_s,
            x.total_cost,
            y.total_cost
        );
    }
    let _ = writeln!(s, "{:<20} {:>14} {:>14} {:>14}", "total", "A", "B", "B - A");
    let mut row = |name: &str, x: f64, y: f64| {
        let _ = writeln!(s, "{:<20} {:>14} {:>14} {:>14}", name, x, y, y - x);
    };
    row("events", a.total_events as f64, b.total_events as f64);
    row("messages", a.total_messages as f64, b.total_messages as f64);
    row("state_reads", a.total_state_reads as f64, b.total_state_reads as f64);
    row("communication", a.total_communication as f64, b.total_communication as f64);
    row("cost", a.total_cost, b.total_cost);
    Ok(s)
}

fn cmd_compare(a: &Path, b: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let ma = read_metrics(a)?;
    let mb = read_metrics(b)?;
    let table = compare_reports(&ma, &mb).map_err(|e| Failure::new(EXIT_COMPARE, e))?;
    let _ = write!(out, "{table}");
    Ok(())
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let scenario = load_scenario(path)?;
    let cfg = &scenario.config;
    let _ = writeln!(
        out,
        "{}: ok ({} agents, {} mode, dt = {} s, {} steps)",
        scenario.name,
        cfg.n_agents(),
        cfg.trigger_mode,
        cfg.dt,
        cfg.n_steps()
    );
    Ok(())
}
