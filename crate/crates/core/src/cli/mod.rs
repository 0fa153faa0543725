//! The `aoi` command-line front end.
//!
//! ```text
//! aoi analyze <config.toml> [--delta D]
//! aoi simulate <config.toml> [--discipline D] [--policy P] [--horizon T] [--seed S] [--replications K]
//! aoi sweep <spec.toml> [--out file.csv] [--full]
//! aoi verify [--quick | --full]
//! ```
//!
//! Exit status is 0 on success, 1 on usage or input errors and 2 when a
//! verification check fails. `AOI_WORKERS` sets the number of worker threads.

pub mod config;
pub mod format;
pub mod sweep;
pub mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, DEFAULT_DELTA};
use crate::model::{ConfigError, NetworkConfig, QueueDiscipline};
use crate::policies::PolicyError;
use crate::sim::{self, RunOptions};
use config::PolicyKind;
use format::{num, num_list};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

pub const WORKERS_ENV: &str = "AOI_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("write failed: {0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "aoi", version, about = "Age-of-Information scheduling: bounds, policies and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower bound, optimal randomized allocations and their closed-form ages.
    Analyze {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
    /// Simulate one policy under one queueing discipline.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value = "single")]
        discipline: QueueDiscipline,
        #[arg(long, default_value = "max-weight")]
        policy: PolicyKind,
        #[arg(long, short = 'T', alias = "T")]
        horizon: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
    /// Sweep λ over an experiment spec and write CSV.
    Sweep {
        spec: PathBuf,
        /// Output file; defaults to the spec's `output` or stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use T = 2e6 slots and 10 replications.
        #[arg(long)]
        full: bool,
    },
    /// Run the built-in consistency checks.
    Verify {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        #[arg(long)]
        full: bool,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn execute<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Analyze { config, delta } => {
            let cfg = config::load_config(&config)?;
            write!(out, "{}", analyze_report(&cfg, delta))?;
            Ok(EXIT_OK)
        }
        Command::Simulate {
            config,
            discipline,
            policy,
            horizon,
            seed,
            replications,
            delta,
        } => {
            let mut cfg = config::load_config(&config)?;
            if let Some(h) = horizon {
                cfg = cfg.with_horizon(h)?;
            }
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if replications == 0 {
                return Err(CliError::Invalid("--replications must be at least 1".into()));
            }
            simulate(&cfg, discipline, policy, replications, delta, out, err)?;
            Ok(EXIT_OK)
        }
        Command::Sweep { spec, out: path, full } => {
            let mut spec = config::load_spec(&spec)?;
            if full {
                spec.use_full_settings();
            }
            let rows = sweep::run_sweep(&spec)?;
            match path.or_else(|| spec.output.clone()) {
                Some(p) => {
                    let file = File::create(&p).map_err(|source| CliError::Io {
                        path: p.clone(),
                        source,
                    })?;
                    sweep::write_csv(&rows, BufWriter::new(file))?;
                    writeln!(err, "wrote {} rows to {}", rows.len(), p.display())?;
                }
                None => sweep::write_csv(&rows, &mut *out)?,
            }
            Ok(EXIT_OK)
        }
        Command::Verify { full, .. } => {
            let depth = if full { verify::Depth::Full } else { verify::Depth::Quick };
            let outcomes = verify::run_verify(depth, |o, secs| {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "[{tag}] {} ({secs:.1}s): {}", o.name, o.detail);
            });
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            writeln!(out, "{} of {} checks passed", outcomes.len() - failed, outcomes.len())?;
            Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
    }
}

/// Human-readable summary of the analytical results for one network.
pub fn analyze_report(cfg: &NetworkConfig, delta: f64) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<18} {v}\n"));
    let lb = analysis::lower_bound(cfg);
    line("streams", cfg.n_streams().to_string());
    line("lower_bound", num(lb.value));
    line("gamma_star", num(lb.gamma_star));
    line("throughput_bound", num_list(&lb.throughput));
    line("stability_margin", num(analysis::stability_margin(cfg)));

    let mu_s = analysis::mu_single(cfg);
    let mu_n = analysis::mu_noqueue(cfg);
    line("mu_single", num_list(mu_s.mu()));
    line("mu_noqueue", num_list(mu_n.mu()));
    let fifo = analysis::mu_fifo(cfg, delta);
    match &fifo {
        Ok(r) => line("mu_fifo", num_list(r.spec.mu())),
        Err(e) => line("mu_fifo", format!("infeasible: {e}")),
    }
    line("ewsaoi_single", num(analysis::ewsaoi_single_optimal(cfg)));
    line("ewsaoi_noqueue", num(analysis::ewsaoi_noqueue_optimal(cfg)));
    match &fifo {
        Ok(r) => line("ewsaoi_fifo", num(r.ewsaoi)),
        Err(_) => line("ewsaoi_fifo", "infeasible".into()),
    }
    s
}

fn simulate(
    cfg: &NetworkConfig,
    discipline: QueueDiscipline,
    kind: PolicyKind,
    replications: usize,
    delta: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let (policy, note) = sweep::build_policy(cfg, discipline, kind, delta)?;
    if let Some(note) = note {
        writeln!(err, "warning: {note}")?;
    }
    writeln!(out, "policy             {policy}")?;
    writeln!(out, "discipline         {discipline}")?;
    writeln!(out, "horizon            {}", cfg.horizon())?;
    writeln!(out, "lower_bound        {}", num(analysis::lower_bound(cfg).value))?;
    if replications == 1 {
        let r = sim::run(cfg, discipline, &policy, &RunOptions::without_log());
        writeln!(out, "slots_run          {}", r.slots_run())?;
        writeln!(out, "ewsaoi             {}", num(r.ewsaoi))?;
        writeln!(out, "diverged           {}", r.diverged)?;
        writeln!(out, "backlog_slope      {}", num(r.backlog_slope))?;
        let n = cfg.n_streams();
        let per = |f: &dyn Fn(usize) -> f64| num_list(&(0..n).map(f).collect::<Vec<_>>());
        writeln!(out, "mean_aoi           {}", per(&|i| r.stats.mean_aoi(i)))?;
        writeln!(out, "throughput         {}", per(&|i| r.stats.throughput(i)))?;
        writeln!(out, "backlog_mean       {}", per(&|i| r.stats.backlog_mean(i)))?;
    } else {
        let rep = sim::replicate(cfg, discipline, &policy, replications, &RunOptions::without_log());
        writeln!(out, "replications       {replications}")?;
        writeln!(out, "ewsaoi_mean        {}", num(rep.mean))?;
        writeln!(out, "ewsaoi_stderr      {}", num(rep.stderr))?;
        writeln!(out, "diverged_fraction  {}", num(rep.diverged_fraction))?;
    }
    Ok(())
}

/// Applies `AOI_WORKERS` to the global thread pool, if set.
pub fn configure_workers() -> Result<(), CliError> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| CliError::Invalid(format!("{WORKERS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("cannot start {workers} workers: {e}")))
}
