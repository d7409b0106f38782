//! Command-line front end for the `noisyqed` library.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod selftest;
pub mod tasks;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Task};
use error::CliError;
use output::{write_artifacts, Format, RunInfo};
use tasks::Outcome;

#[derive(Debug, Parser)]
#[command(name = "noisyqed", version, about = "Noise-averaged single-photon scattering and Ramsey-envelope recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Averaged t, r and r_loss on a detuning grid.
    Spectrum,
    /// Ramsey envelope on a time grid.
    Ramsey,
    /// Envelope recovered from a scattering CSV.
    Invert,
    /// Monte Carlo overlap against the analytic spectrum.
    McValidate,
    /// Scattering through a lossy localized mode.
    Fano,
    /// Weak-drive homodyne and power outputs.
    Bloch,
    /// Dataset of a published figure (`all` for every one).
    Figure { name: Option<String> },
    /// Quick consistency checks.
    Selftest,
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run_task(task: Task, cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    cfg.validate(task)?;
    let start = Instant::now();
    let outcome: Outcome = match task {
        Task::Spectrum => tasks::run_spectrum(cfg)?,
        Task::Ramsey => tasks::run_ramsey(cfg)?,
        Task::Invert => tasks::run_invert(cfg)?,
        Task::McValidate => tasks::run_mc_validate(cfg)?,
        Task::Fano => tasks::run_fano(cfg)?,
        Task::Bloch => tasks::run_bloch(cfg)?,
        Task::Figure => unreachable!("figures are dispatched separately"),
    };
    let info = RunInfo {
        task: task.stem(),
        config: cfg,
        seed: cfg.seed,
        threads: common.threads,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    let paths = write_artifacts(&common.out, task.stem(), common.format, &outcome.artifacts, &info)?;
    for p in paths {
        println!("{}", p.display());
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run_figures(name: Option<String>, cfg: &RunConfig, common: &Common) -> Result<(), CliError> {
    cfg.validate(Task::Figure)?;
    let name = name
        .or_else(|| cfg.figure.as_ref().map(|f| f.name.clone()))
        .ok_or_else(|| CliError::config(format!("figure: name required, one of {:?} or `all`", figures::FIGURE_IDS)))?;
    let ids: Vec<&str> = if name == "all" {
        figures::FIGURE_IDS.to_vec()
    } else {
        vec![name.as_str()]
    };
    for id in ids {
        let fig = figures::figure(id)
            .ok_or_else(|| CliError::config(format!("figure: unknown `{id}`, expected one of {:?}", figures::FIGURE_IDS)))?;
        let start = Instant::now();
        let art = figures::figure_artifacts(&fig)?;
        let info = RunInfo {
            task: "figure",
            config: &fig,
            seed: cfg.seed,
            threads: common.threads,
            runtime_seconds: start.elapsed().as_secs_f64(),
        };
        for p in write_artifacts(&common.out, fig.id, common.format, &art, &info)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn run_selftest() -> Result<(), CliError> {
    let checks = selftest::run_all();
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.pass);
    }
    if failed > 0 {
        return Err(CliError::statistical(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Spectrum => run_task(Task::Spectrum, &cfg, &cli.common),
        Command::Ramsey => run_task(Task::Ramsey, &cfg, &cli.common),
        Command::Invert => run_task(Task::Invert, &cfg, &cli.common),
        Command::McValidate => run_task(Task::McValidate, &cfg, &cli.common),
        Command::Fano => run_task(Task::Fano, &cfg, &cli.common),
        Command::Bloch => run_task(Task::Bloch, &cfg, &cli.common),
        Command::Figure { name } => run_figures(name, &cfg, &cli.common),
        Command::Selftest => run_selftest(),
    }
}

/// Runs the command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return 2;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
