//! `reachsim` command-line tool.
//!
//! Exit codes: 0 success (for `simulate`, a converged run), 1 error or
//! failed validation, 2 simulation timeout.

mod manifest;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reachsim::config::{resolve_controller, resolve_robot, resolve_scenario, BUILTIN_ROBOT, BUILTIN_TUNED};
use reachsim::metrics::{compute_metrics, compute_sample_metrics, MotionMetrics};
use reachsim::sim::{run, Disturbance, Termination};
use reachsim::trace_io::{read_trace_csv, write_trace_csv};
use reachsim::validation::{run_all, ValidateOptions};

use crate::manifest::RunManifest;

/// Like `println!`, but a closed stdout (e.g. piped into `head`) is not an
/// error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Directory used for `simulate` output when `--out` is not given.
const OUT_DIR_ENV: &str = "REACHSIM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "reachsim", version, about = "Serial-arm reaching simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a closed-loop reaching simulation and write a trace CSV plus a
    /// JSON manifest next to it.
    Simulate(SimulateArgs),
    /// Compute motion metrics of a trace CSV.
    Metrics(MetricsArgs),
    /// Run the randomized self-check suite.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Robot description file or `builtin:7dof`.
    #[arg(long)]
    robot: Option<String>,
    /// Controller file, `builtin:published` or `builtin:tuned`.
    #[arg(long)]
    controller: Option<String>,
    /// Scenario file; defaults apply when omitted.
    #[arg(long)]
    scenario: Option<String>,
    /// Trace CSV path. Defaults to `trace.csv` in $REACHSIM_OUT_DIR or the
    /// working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    observer: Option<Switch>,
    /// Fractional plant mass error, e.g. 0.2 for +20%.
    #[arg(long)]
    perturb_mass: Option<f64>,
    /// Joint torque injection `joint:torque:t0:t1`; `t1` may be empty for
    /// no end. Repeatable.
    #[arg(long, value_parser = parse_disturbance)]
    disturb: Vec<Disturbance<f64>>,
    /// Store the wall-clock duration in the manifest. Off by default so
    /// manifests are byte-for-byte reproducible.
    #[arg(long)]
    record_wall_clock: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    trace: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, default_value_t = ValidateOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = ValidateOptions::default().trials)]
    trials: usize,
    #[arg(long, hide = true)]
    flip_coriolis_sign: bool,
}

fn parse_disturbance(s: &str) -> std::result::Result<Disturbance<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(format!("expected joint:torque:t0:t1, got '{s}'"));
    }
    let num = |p: &str, what: &str| p.trim().parse::<f64>().map_err(|_| format!("bad {what} '{p}'"));
    let joint = parts[0]
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("bad joint '{}'", parts[0]))?;
    let t1 = if parts[3].trim().is_empty() {
        None
    } else {
        Some(num(parts[3], "t1")?)
    };
    Ok(Disturbance {
        joint,
        torque: num(parts[1], "torque")?,
        t0: num(parts[2], "t0")?,
        t1,
    })
}

fn main() -> ExitCode {
    // Usage errors exit with 1 so that 2 always means a timeout.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Metrics(a) => metrics(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn default_trace_path() -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join("trace.csv"),
        _ => PathBuf::from("trace.csv"),
    }
}

/// `trace.csv` -> `trace.manifest.json`.
fn manifest_path(trace: &Path) -> PathBuf {
    let stem = trace.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    trace.with_file_name(format!("{stem}.manifest.json"))
}

fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let mut defaulted = Vec::new();
    let robot_spec = a.robot.clone().unwrap_or_else(|| {
        defaulted.push("robot".to_string());
        BUILTIN_ROBOT.to_string()
    });
    let controller_spec = a.controller.clone().unwrap_or_else(|| {
        defaulted.push("controller".to_string());
        BUILTIN_TUNED.to_string()
    });
    let chain = resolve_robot(&robot_spec)?;
    let controller = resolve_controller(&controller_spec, chain.dof())?;
    defaulted.extend(controller.defaulted.iter().map(|p| format!("controller.{p}")));
    let observer_default = controller.value.observer.enabled;
    let scenario = resolve_scenario(a.scenario.as_deref(), chain.dof(), observer_default)?;
    let mut config = scenario.value;
    let mut sim_defaulted = scenario.defaulted;
    let mut overridden = |path: &str| sim_defaulted.retain(|p| p != path);
    if let Some(t) = a.max_time {
        config.max_time = t;
        overridden("simulation.max_time");
    }
    if let Some(dt) = a.dt {
        config.dt = dt;
        overridden("simulation.dt");
    }
    if let Some(o) = a.observer {
        config.observer_on = o == Switch::On;
        overridden("simulation.toggles.observer");
    }
    if let Some(m) = a.perturb_mass {
        config.mass_perturbation = m;
        overridden("simulation.perturbation.mass");
    }
    config.disturbances.extend(a.disturb.iter().cloned());
    config.validate(chain.dof()).context("invalid simulation settings")?;
    defaulted.extend(sim_defaulted);

    let trace_path = a.out.clone().unwrap_or_else(|| {
        defaulted.push("out".to_string());
        default_trace_path()
    });
    let manifest_path = manifest_path(&trace_path);
    if let Some(dir) = trace_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let started = Instant::now();
    let trace = run(&chain, &controller.value, &config)?;
    let elapsed = started.elapsed().as_secs_f64();

    let file = File::create(&trace_path).with_context(|| format!("creating {}", trace_path.display()))?;
    let mut w = BufWriter::new(file);
    write_trace_csv(&trace, &mut w)?;
    w.flush()?;

    let manifest = RunManifest::new(
        &robot_spec,
        &chain,
        &controller_spec,
        &controller.value,
        &config,
        defaulted,
        &trace_path,
        &manifest_path,
        &trace,
        a.record_wall_clock.then_some(elapsed),
    );
    std::fs::write(&manifest_path, manifest.to_json()?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    let last = trace.last();
    say!(
        "{}: t = {:.3} s, |dx| = {:.4} m, {} samples",
        trace.termination.label(),
        last.t,
        last.dx_norm,
        trace.records.len()
    );
    say!("trace: {}", trace_path.display());
    say!("manifest: {}", manifest_path.display());
    if let Ok(m) = compute_metrics(&trace) {
        say!(
            "straightness_ratio = {:.4}, t_peak_fraction = {:.4}, symmetry_index = {:.4}, n_speed_peaks = {}",
            m.straightness_ratio, m.t_peak_fraction, m.symmetry_index, m.n_speed_peaks
        );
    }
    Ok(match &trace.termination {
        Termination::Converged => ExitCode::SUCCESS,
        Termination::Timeout => ExitCode::from(2),
        Termination::NumericalFailure { time, message } => {
            eprintln!("error: numerical failure at t = {time} s: {message}");
            ExitCode::from(1)
        }
    })
}

fn metrics(a: MetricsArgs) -> Result<ExitCode> {
    let file = File::open(&a.trace).with_context(|| format!("{}: file not found", a.trace.display()))?;
    let table = read_trace_csv(BufReader::new(file)).with_context(|| format!("reading {}", a.trace.display()))?;
    let m = compute_sample_metrics(&table.samples()?)?;
    match a.format {
        Format::Text => say!("{}", metrics_text(&m).trim_end()),
        Format::Csv => say!("{}", metrics_csv(&m).trim_end()),
    }
    Ok(ExitCode::SUCCESS)
}

fn metrics_text(m: &MotionMetrics) -> String {
    let mut out = String::new();
    for (name, value) in MotionMetrics::FIELDS.iter().zip(m.values()) {
        if *name == "n_speed_peaks" {
            out.push_str(&format!("{name} = {}\n", m.n_speed_peaks));
        } else {
            out.push_str(&format!("{name} = {value}\n"));
        }
    }
    out
}

fn metrics_csv(m: &MotionMetrics) -> String {
    let values: Vec<String> = MotionMetrics::FIELDS
        .iter()
        .zip(m.values())
        .map(|(name, v)| if *name == "n_speed_peaks" { m.n_speed_peaks.to_string() } else { v.to_string() })
        .collect();
    format!("{}\n{}\n", MotionMetrics::FIELDS.join(","), values.join(","))
}

fn validate(a: ValidateArgs) -> Result<ExitCode> {
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let opts = ValidateOptions {
        seed: a.seed,
        trials: a.trials,
        flip_coriolis_sign: a.flip_coriolis_sign,
    };
    let results = run_all(&opts)?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        say!("{status} {:<24} worst = {:.3e}  tolerance = {:.1e}", r.name, r.worst, r.tolerance);
        if !r.passed {
            failed += 1;
            say!("     reproduce with --seed {} --trials {}: {}", a.seed, a.trials, r.detail);
        }
    }
    say!("{} of {} checks passed (seed {})", results.len() - failed, results.len(), a.seed);
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
