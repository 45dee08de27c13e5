//! Experiment drivers for inductive matrix completion: recovery phase
//! diagrams, noisy and inexact-side-information error curves, penalty
//! sweeps with cross-validation, a projection diagnostic and the MovieLens
//! comparison. Results are long-format CSV tables with per-figure data and
//! Vega-Lite specs alongside.

pub mod config;
pub mod error;
pub mod plots;
pub mod runner;
pub mod stats;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig, Preset};
pub use error::{ExpError, Result};
pub use runner::{run, RunOutput};
pub use table::{Method, ResultTable};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const FIGURES_DIR: &str = "figures";

/// Writes the results table, its summary, the resolved config, any
/// artifacts and the figures into `cfg.out`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Vec<PathBuf>> {
    let dir = cfg.out.as_path();
    fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| ExpError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    put(CONFIG_FILE, &cfg.to_text())?;
    put(RESULTS_FILE, &out.table.to_csv()?)?;
    put(SUMMARY_FILE, &table::summary_to_csv(&out.table.summarize())?)?;
    for a in &out.artifacts {
        put(&a.name, &a.contents)?;
    }
    written.extend(plots::emit_plots(&out.table, &dir.join(FIGURES_DIR))?);
    Ok(written)
}

/// Rebuilds the summary and figures of an earlier run from its results
/// file.
pub fn report(dir: &Path) -> Result<ResultTable> {
    let table = ResultTable::read_csv(&dir.join(RESULTS_FILE))?;
    let summary = dir.join(SUMMARY_FILE);
    fs::write(&summary, table::summary_to_csv(&table.summarize())?).map_err(|e| ExpError::io(&summary, e))?;
    plots::emit_plots(&table, &dir.join(FIGURES_DIR))?;
    Ok(table)
}
