use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imc_experiments::{report, run, write_outputs, Experiment, ExperimentConfig, Preset, Result};
use log::info;

/// Inductive matrix completion experiments.
#[derive(Parser)]
#[command(name = "imc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact-recovery success rates of IMC and MC against the sampling rate.
    Phase {
        /// Fine sampling grid near the IMC threshold, IMC only.
        #[arg(long)]
        fine: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Relative error under Gaussian noise with exact side information.
    Noisy(Common),
    /// Relative error with inexact side information.
    Inexact(Common),
    /// IMC error as the side information drifts from the truth.
    DeltaSweep(Common),
    /// Interpolation error across the penalty grid.
    Interp(Common),
    /// Cross-validated interpolation against IMC and MC.
    InterpCv(Common),
    /// Row norms of unprojected iterates relative to the constraint radius.
    ProjectionCheck(Common),
    /// Test RMSE on MovieLens 100K (needs --data-dir).
    Movielens(Common),
    /// Rebuild summary and figures from an existing results directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Settings shared by every experiment. Precedence: preset, then flags,
/// then the config file.
#[derive(Args)]
struct Common {
    #[arg(long, default_value = "desk", value_parser = ["paper", "desk"])]
    preset: String,
    #[arg(long)]
    n1: Option<String>,
    #[arg(long)]
    n2: Option<String>,
    #[arg(long)]
    a1: Option<String>,
    #[arg(long)]
    a2: Option<String>,
    #[arg(long)]
    rank: Option<String>,
    /// Comma-separated sampling rates.
    #[arg(long)]
    p_grid: Option<String>,
    /// Comma-separated side-information distances.
    #[arg(long)]
    delta: Option<String>,
    /// Comma-separated penalty weights.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Comma-separated MovieLens training sizes.
    #[arg(long)]
    m_grid: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_parser = ["enforce", "monitor", "off"])]
    projection: Option<String>,
    /// Use the conservative theoretical step size.
    #[arg(long)]
    safe_step: bool,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    /// Draw a fresh ground truth per trial.
    #[arg(long)]
    regenerate_truth: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    data_dir: Option<String>,
    /// `key = value` settings applied last.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::preset(experiment, self.preset.parse::<Preset>()?);
        let flags = [
            ("n1", &self.n1),
            ("n2", &self.n2),
            ("a1", &self.a1),
            ("a2", &self.a2),
            ("rank", &self.rank),
            ("p_grid", &self.p_grid),
            ("delta_grid", &self.delta),
            ("lambda_grid", &self.lambda_grid),
            ("m_grid", &self.m_grid),
            ("sigma", &self.sigma),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("projection", &self.projection),
            ("max_iters", &self.max_iters),
            ("folds", &self.folds),
            ("threads", &self.threads),
            ("data_dir", &self.data_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.safe_step |= self.safe_step;
        cfg.regenerate_truth |= self.regenerate_truth;
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if cfg.experiment != experiment {
            return Err(imc_experiments::ExpError::config(format!(
                "config file names experiment {} but the subcommand runs {experiment}",
                cfg.experiment
            )));
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (experiment, common) = match &cli.command {
        Command::Phase { fine, common } => {
            (if *fine { Experiment::PhaseImcFine } else { Experiment::Phase }, common)
        }
        Command::Noisy(c) => (Experiment::NoisyError, c),
        Command::Inexact(c) => (Experiment::InexactError, c),
        Command::DeltaSweep(c) => (Experiment::DeltaSweep, c),
        Command::Interp(c) => (Experiment::InterpSweep, c),
        Command::InterpCv(c) => (Experiment::InterpCv, c),
        Command::ProjectionCheck(c) => (Experiment::ProjectionCheck, c),
        Command::Movielens(c) => (Experiment::Movielens, c),
        Command::Report { out } => {
            let table = report(out)?;
            println!("{}: {} rows, {} failed runs", out.display(), table.len(), table.failures());
            return Ok(());
        }
    };
    let cfg = common.resolve(experiment)?;
    info!("running {experiment} into {}", cfg.out.display());
    let out = run(&cfg)?;
    write_outputs(&cfg, &out)?;
    let bad = out.table.non_finite();
    if !bad.is_empty() {
        return Err(imc_experiments::ExpError::config(format!(
            "{} result rows are not finite, first: {:?}",
            bad.len(),
            bad[0]
        )));
    }
    println!(
        "{experiment}: {} rows, {} failed runs, written to {}",
        out.table.len(),
        out.table.failures(),
        cfg.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
