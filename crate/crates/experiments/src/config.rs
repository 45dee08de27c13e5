//! Experiment settings: presets, `key = value` files and validation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use imc_core::solvers::{ProjectionMode, SolverConfig, StepRule};
use serde::{Deserialize, Serialize};

use crate::error::{ExpError, Result};

const INTERP_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Phase,
    PhaseImcFine,
    NoisyError,
    InexactError,
    DeltaSweep,
    InterpSweep,
    InterpCv,
    ProjectionCheck,
    Movielens,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Phase,
        Experiment::PhaseImcFine,
        Experiment::NoisyError,
        Experiment::InexactError,
        Experiment::DeltaSweep,
        Experiment::InterpSweep,
        Experiment::InterpCv,
        Experiment::ProjectionCheck,
        Experiment::Movielens,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Phase => "phase",
            Experiment::PhaseImcFine => "phase-imc-fine",
            Experiment::NoisyError => "noisy-error",
            Experiment::InexactError => "inexact-error",
            Experiment::DeltaSweep => "delta-sweep",
            Experiment::InterpSweep => "interp-sweep",
            Experiment::InterpCv => "interp-cv",
            Experiment::ProjectionCheck => "projection-check",
            Experiment::Movielens => "movielens",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| ExpError::config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preset {
    /// The dimensions and trial counts of the published study.
    Paper,
    /// Small instances that finish in minutes.
    #[default]
    Desk,
}

impl FromStr for Preset {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(ExpError::config(format!("unknown preset `{other}` (expected paper or desk)"))),
        }
    }
}

/// Default grid of penalty weights: zero plus 13 log-spaced values from
/// `1e-4` to `1e2`.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    grid.extend((0..13).map(|k| 10f64.powf(-4.0 + k as f64 * 0.5)));
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n1: usize,
    pub n2: usize,
    pub a1: usize,
    pub a2: usize,
    pub rank: usize,
    pub p_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// Training-set sizes for the MovieLens comparison.
    pub m_grid: Vec<usize>,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub max_iters: usize,
    pub step_scale: f64,
    /// Use the conservative theoretical step instead of the spectral one.
    pub safe_step: bool,
    pub rel_tol: f64,
    pub projection: ProjectionMode,
    /// Relative error below which a run counts as exact recovery.
    pub success_tol: f64,
    pub folds: usize,
    /// Draw a fresh ground truth for every trial instead of fixing one.
    pub regenerate_truth: bool,
    /// Worker threads for independent trials (0 = all cores).
    pub threads: usize,
    pub data_dir: Option<PathBuf>,
    pub svd_components: usize,
    pub clip_ratings: bool,
}

impl ExperimentConfig {
    pub fn preset(experiment: Experiment, preset: Preset) -> Self {
        let paper = preset == Preset::Paper;
        let (n, a, r) = if paper { (1000, 50, 10) } else { (200, 20, 5) };
        let mut cfg = Self {
            experiment,
            n1: n,
            n2: n,
            a1: a,
            a2: a,
            rank: r,
            p_grid: vec![0.05],
            delta_grid: vec![0.0],
            lambda_grid: default_lambda_grid(),
            m_grid: Vec::new(),
            sigma: 0.0,
            trials: 20,
            seed: 20240501,
            out: PathBuf::from("results").join(experiment.id()),
            max_iters: 2000,
            step_scale: 0.5,
            safe_step: false,
            rel_tol: 1e-12,
            projection: ProjectionMode::Monitor,
            success_tol: 1e-3,
            folds: 5,
            regenerate_truth: false,
            threads: 0,
            data_dir: None,
            svd_components: 10,
            clip_ratings: false,
        };
        match experiment {
            Experiment::Phase => {
                cfg.trials = if paper { 100 } else { 20 };
                cfg.p_grid = if paper {
                    vec![0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1]
                } else {
                    vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3]
                };
            }
            Experiment::PhaseImcFine => {
                cfg.trials = if paper { 100 } else { 20 };
                cfg.p_grid = if paper {
                    vec![0.0008, 0.001, 0.0012, 0.0014, 0.0016, 0.0018, 0.002, 0.0025, 0.003]
                } else {
                    vec![0.002, 0.003, 0.004, 0.005, 0.006, 0.008, 0.01]
                };
            }
            Experiment::NoisyError => {
                cfg.sigma = 0.001;
                cfg.p_grid = if paper {
                    vec![0.01, 0.02, 0.03, 0.04, 0.05]
                } else {
                    vec![0.05, 0.1, 0.15, 0.2, 0.3]
                };
            }
            Experiment::InexactError => {
                cfg.sigma = 0.001;
                cfg.delta_grid = vec![0.05, 0.1, 0.2];
                cfg.p_grid = if paper {
                    vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.1, 0.2]
                } else {
                    vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.5]
                };
            }
            Experiment::DeltaSweep => {
                cfg.sigma = 0.001;
                cfg.p_grid = vec![if paper { 0.05 } else { 0.2 }];
                cfg.delta_grid = (1..=10).map(|k| 0.02 * k as f64).collect();
            }
            Experiment::InterpSweep => {
                cfg.delta_grid = vec![0.05];
                cfg.p_grid = vec![0.02, 0.1];
                cfg.trials = if paper { 5 } else { 3 };
                // the penalty shrinks the step by 1 + 2 lambda, so large
                // weights need a longer budget to reach the tolerance
                cfg.max_iters = INTERP_MAX_ITERS;
            }
            Experiment::InterpCv => {
                cfg.delta_grid = vec![0.05];
                cfg.p_grid = vec![0.02, 0.05];
                cfg.trials = if paper { 1 } else { 2 };
                cfg.max_iters = INTERP_MAX_ITERS;
            }
            Experiment::ProjectionCheck => {
                cfg.max_iters = 200;
                cfg.rel_tol = 0.0;
                cfg.p_grid = vec![if paper { 0.01 } else { 0.05 }];
                if !paper {
                    (cfg.n1, cfg.n2, cfg.a1, cfg.a2) = (300, 300, 30, 30);
                }
            }
            Experiment::Movielens => {
                cfg.rank = 5;
                cfg.trials = if paper { 20 } else { 3 };
                cfg.m_grid = if paper {
                    vec![5000, 10000, 20000, 40000, 60000, 80000]
                } else {
                    vec![5000, 20000, 80000]
                };
                cfg.p_grid = Vec::new();
                cfg.max_iters = if paper { 2000 } else { 500 };
                cfg.rel_tol = 1e-9;
            }
        }
        cfg
    }

    /// Solver settings shared by every run of this experiment.
    pub fn solver(&self, rank: usize) -> SolverConfig {
        SolverConfig {
            rank,
            step: if self.safe_step {
                StepRule::Conservative
            } else {
                StepRule::Spectral { scale: self.step_scale }
            },
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            projection: self.projection,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ExpError::config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.experiment != Experiment::Movielens {
            if self.rank == 0 || self.rank > self.a1.min(self.a2) || self.a1 > self.n1 || self.a2 > self.n2 {
                return bad(format!(
                    "need 1 <= rank <= min(a1, a2) and a <= n; got n=({}, {}), a=({}, {}), rank={}",
                    self.n1, self.n2, self.a1, self.a2, self.rank
                ));
            }
            check_grid("p_grid", &self.p_grid, |p| p > 0.0 && p <= 1.0)?;
        }
        check_grid("delta_grid", &self.delta_grid, |d| (0.0..=1.0).contains(&d))?;
        if matches!(self.experiment, Experiment::InterpSweep | Experiment::InterpCv) {
            check_grid("lambda_grid", &self.lambda_grid, |l| l >= 0.0 && l.is_finite())?;
        }
        if self.experiment == Experiment::Movielens {
            if self.m_grid.is_empty() || self.m_grid.windows(2).any(|w| w[0] >= w[1]) || self.m_grid[0] == 0 {
                return bad("m_grid must be nonempty and strictly increasing".into());
            }
            if self.rank == 0 {
                return bad("rank must be at least 1".into());
            }
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if self.experiment == Experiment::InterpCv && self.folds < 2 {
            return bad("cross-validation needs at least 2 folds".into());
        }
        self.solver(self.rank.max(1)).validate()?;
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ExpError::config(format!("{source}:{}: expected `key = value`", ln + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| ExpError::config(format!("{source}:{}: {e}", ln + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.parse()?,
            "n1" => self.n1 = num(key, value)?,
            "n2" => self.n2 = num(key, value)?,
            "a1" => self.a1 = num(key, value)?,
            "a2" => self.a2 = num(key, value)?,
            "n" => (self.n1, self.n2) = (num(key, value)?, num(key, value)?),
            "a" => (self.a1, self.a2) = (num(key, value)?, num(key, value)?),
            "rank" => self.rank = num(key, value)?,
            "p_grid" => self.p_grid = list(key, value)?,
            "delta_grid" => self.delta_grid = list(key, value)?,
            "lambda_grid" => self.lambda_grid = list(key, value)?,
            "m_grid" => self.m_grid = list(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "max_iters" => self.max_iters = num(key, value)?,
            "step_scale" => self.step_scale = num(key, value)?,
            "safe_step" => self.safe_step = num(key, value)?,
            "rel_tol" => self.rel_tol = num(key, value)?,
            "projection" => self.projection = value.parse()?,
            "success_tol" => self.success_tol = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "regenerate_truth" => self.regenerate_truth = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "svd_components" => self.svd_components = num(key, value)?,
            "clip_ratings" => self.clip_ratings = num(key, value)?,
            other => return Err(ExpError::config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// The settings as `key = value` lines that [`Self::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("experiment = {}", self.experiment),
            format!("n1 = {}", self.n1),
            format!("n2 = {}", self.n2),
            format!("a1 = {}", self.a1),
            format!("a2 = {}", self.a2),
            format!("rank = {}", self.rank),
            format!("p_grid = {}", join(&self.p_grid)),
            format!("delta_grid = {}", join(&self.delta_grid)),
            format!("lambda_grid = {}", join(&self.lambda_grid)),
            format!(
                "m_grid = {}",
                self.m_grid.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
            ),
            format!("sigma = {}", self.sigma),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!("out = {}", self.out.display()),
            format!("max_iters = {}", self.max_iters),
            format!("step_scale = {}", self.step_scale),
            format!("safe_step = {}", self.safe_step),
            format!("rel_tol = {}", self.rel_tol),
            format!("projection = {}", self.projection),
            format!("success_tol = {}", self.success_tol),
            format!("folds = {}", self.folds),
            format!("regenerate_truth = {}", self.regenerate_truth),
            format!("threads = {}", self.threads),
            format!("svd_components = {}", self.svd_components),
            format!("clip_ratings = {}", self.clip_ratings),
        ];
        if let Some(d) = &self.data_dir {
            lines.push(format!("data_dir = {}", d.display()));
        }
        lines.join("\n") + "\n"
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| ExpError::config(format!("bad value `{value}` for `{key}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn check_grid(name: &str, grid: &[f64], ok: impl Fn(f64) -> bool) -> Result<()> {
    if grid.is_empty() {
        return Err(ExpError::config(format!("{name} is empty")));
    }
    if let Some(&v) = grid.iter().find(|&&v| !ok(v)) {
        return Err(ExpError::config(format!("{name} contains out-of-range value {v}")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExpError::config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}
