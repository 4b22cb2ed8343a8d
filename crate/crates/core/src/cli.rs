//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run or a validation check fails,
//! 2 for usage and configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{default_config_text, parse_config_with_overrides, RunConfig, WORKERS_ENV};
use crate::error::Error;
use crate::experiments::{run_sweep, ConvergenceReport, SweepKind};
use crate::model::angular_to_mhz;
use crate::output::{write_csv, write_svg};
use crate::validation::run_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qutrit-transfer", version, about = "Qutrit state transfer through two lossy resonators")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    /// Write results as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write a plot as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one transfer and report fidelity and diagnostics.
    Transfer,
    /// Fidelity against the detuning ratio D for each resonator lifetime.
    SweepDetuning(OutputArgs),
    /// Fidelity over input states (γ, θ).
    SweepStates(OutputArgs),
    /// Fidelity over coupling inhomogeneity (c, d).
    SweepCoupling(OutputArgs),
    /// Sensitivity to photon truncation and time step.
    Converge(OutputArgs),
    /// Run the built-in physics self-checks.
    Validate,
    /// Print the annotated default configuration.
    DefaultConfig,
}

fn load(cli: &Cli, workers_env: Option<&str>) -> Result<RunConfig, Error> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        None => String::new(),
    };
    let mut cfg = parse_config_with_overrides(&text, &cli.set)?;
    cfg.apply_workers_override(workers_env)?;
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Io { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn transfer(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Error> {
    let params = cfg.scenario.design.build()?;
    let r = cfg.scenario.run()?;
    let (pa, pb) = r.peak_photons_split();
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    writeln!(out, "fidelity          {:.6}", r.fidelity).map_err(w)?;
    writeln!(out, "lambda1 / 2pi     {:.6} MHz", angular_to_mhz(r.schedule.lambda1)).map_err(w)?;
    writeln!(out, "lambda2 / 2pi     {:.6} MHz", angular_to_mhz(r.schedule.lambda2)).map_err(w)?;
    writeln!(out, "mu / 2pi          {:.6} MHz", angular_to_mhz(params.mu[0])).map_err(w)?;
    writeln!(out, "t1                {:.6} ns", r.schedule.t1).map_err(w)?;
    writeln!(out, "t2                {:.6} ns", r.schedule.t2).map_err(w)?;
    writeln!(out, "Q_a               {:.6e}", r.q_a).map_err(w)?;
    writeln!(out, "Q_b               {:.6e}", r.q_b).map_err(w)?;
    writeln!(out, "peak photons a/b  {pa:.6} / {pb:.6}").map_err(w)?;
    writeln!(out, "max |Tr rho - 1|  {:.3e}", r.max_trace_error()).map_err(w)?;
    writeln!(out, "min eigenvalue    {:.3e}", r.min_eigenvalue()).map_err(w)?;
    for warning in &r.warnings {
        writeln!(out, "warning: {warning}").map_err(w)?;
    }
    Ok(EXIT_OK)
}

fn sweep(cfg: &RunConfig, kind: SweepKind, args: &OutputArgs, out: &mut dyn Write) -> Result<i32, Error> {
    let start = Instant::now();
    let result = run_sweep(kind, &cfg.scenario, &cfg.sweep)?;
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    let s = result.summary();
    writeln!(
        out,
        "{} points in {:.1} s: min F {:.6}, mean F {:.6}, max F {:.6}",
        result.rows.len(),
        start.elapsed().as_secs_f64(),
        s.min,
        s.mean,
        s.max
    )
    .map_err(w)?;
    match kind {
        SweepKind::Detuning => {
            for (kappa, d, f) in result.detuning_optima() {
                writeln!(out, "kappa^-1 = {kappa} us: best D = {d}, F = {f:.6}").map_err(w)?;
            }
        }
        SweepKind::Convergence => {
            let n = cfg.scenario.settings.layout.n_photon();
            let report = ConvergenceReport::from_result(&result, n, cfg.scenario.settings.integrator.dt * 1e3);
            if let Some(d) = report.truncation_delta {
                writeln!(out, "truncation delta  {d:.3e}").map_err(w)?;
            }
            if let Some(d) = report.timestep_delta {
                writeln!(out, "timestep delta    {d:.3e}").map_err(w)?;
            }
        }
        _ => {}
    }
    let csv = args.csv.as_ref().or(cfg.output_csv.as_ref());
    let svg = args.svg.as_ref().or(cfg.output_svg.as_ref());
    if let Some(path) = csv {
        write_csv(path, &result, &cfg.metadata())?;
        writeln!(out, "wrote {}", path.display()).map_err(w)?;
    }
    if let Some(path) = svg {
        write_svg(path, &result)?;
        writeln!(out, "wrote {}", path.display()).map_err(w)?;
    }
    Ok(EXIT_OK)
}

fn validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Error> {
    let checks = run_all(&cfg.scenario)?;
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        writeln!(
            out,
            "{} {:<24} measured {:.3e}  limit {:.3e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        )
        .map_err(w)?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code. `workers_env` is the value of [`WORKERS_ENV`], if set.
pub fn run<I, T>(args: I, workers_env: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    if let Command::DefaultConfig = cli.command {
        return match write!(out, "{}", default_config_text()) {
            Ok(()) => EXIT_OK,
            Err(_) => EXIT_FAILURE,
        };
    }
    let cfg = match load(&cli, workers_env) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let outcome = match &cli.command {
        Command::Transfer => transfer(&cfg, out),
        Command::SweepDetuning(a) => sweep(&cfg, SweepKind::Detuning, a, out),
        Command::SweepStates(a) => sweep(&cfg, SweepKind::StateGrid, a, out),
        Command::SweepCoupling(a) => sweep(&cfg, SweepKind::Coupling, a, out),
        Command::Converge(a) => sweep(&cfg, SweepKind::Convergence, a, out),
        Command::Validate => validate(&cfg, out),
        Command::DefaultConfig => unreachable!(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point used by the binary.
pub fn main_with_env() -> i32 {
    let env = std::env::var(WORKERS_ENV).ok();
    run(std::env::args_os(), env.as_deref(), &mut std::io::stdout(), &mut std::io::stderr())
}
