//! Long-format results and their per-cell summaries.

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::error::{ExpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Imc,
    Mc,
    Interp,
    InterpCv,
    /// Properties of the generated instance rather than of an estimator.
    Instance,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Imc => "imc",
            Method::Mc => "mc",
            Method::Interp => "interp",
            Method::InterpCv => "interp-cv",
            Method::Instance => "instance",
        })
    }
}

pub mod metric {
    pub const REL_ERROR: &str = "rel_error";
    pub const SUCCESS: &str = "success";
    pub const ITERS: &str = "iters";
    /// Marks a run that returned an error; the note carries the reason.
    pub const FAILED: &str = "failed";
    pub const RMSE: &str = "rmse";
    pub const CV_MSE: &str = "cv_mse";
    pub const SELECTED_LAMBDA: &str = "selected_lambda";
    pub const ARGMIN_LAMBDA: &str = "argmin_lambda";
    pub const GAMMA_E: &str = "gamma_e";
    pub const MISSPEC_BOUND: &str = "misspec_bound";
    pub const MAX_RATIO_A: &str = "max_ratio_a";
    pub const MAX_RATIO_B: &str = "max_ratio_b";
    pub const PROJECTION_ACTIVE: &str = "projection_active";
    pub const SLOPE: &str = "slope";
    pub const INTERCEPT: &str = "intercept";
    pub const R2: &str = "r2";
    pub const ZERO_USERS: &str = "zero_users";
    pub const ZERO_ITEMS: &str = "zero_items";
    pub const TRAIN_SIZE: &str = "train_size";
}

/// One measurement. `trial` is empty for quantities derived from a whole
/// cell (fits, argmins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub trial: Option<usize>,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub method: Method,
    pub metric: String,
    pub value: f64,
    #[serde(default)]
    pub note: String,
}

/// Where a row sits in the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cell {
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
}

impl Cell {
    pub fn p(p: f64) -> Self {
        Cell {
            p: Some(p),
            ..Cell::default()
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Cell {
            delta: Some(delta),
            ..self
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Cell {
            lambda: Some(lambda),
            ..self
        }
    }

    fn cmp_key(&self, other: &Cell) -> Ordering {
        let c = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        c(self.p, other.p)
            .then(c(self.delta, other.delta))
            .then(c(self.lambda, other.lambda))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        experiment: Experiment,
        trial: Option<usize>,
        cell: Cell,
        method: Method,
        metric: &str,
        value: f64,
    ) {
        self.rows.push(ResultRow {
            experiment,
            trial,
            p: cell.p,
            delta: cell.delta,
            lambda: cell.lambda,
            method,
            metric: metric.to_string(),
            value,
            note: String::new(),
        });
    }

    /// Records a failed run. Newlines in the reason are flattened so the
    /// CSV stays one record per line.
    pub fn push_failure(&mut self, experiment: Experiment, trial: usize, cell: Cell, method: Method, reason: &str) {
        self.push(experiment, Some(trial), cell, method, metric::FAILED, 1.0);
        if let Some(last) = self.rows.last_mut() {
            last.note = reason.replace(['\n', '\r'], " ");
        }
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.metric == metric::FAILED).count()
    }

    /// Rows carrying NaN or infinite values; a well-formed table has none.
    pub fn non_finite(&self) -> Vec<&ResultRow> {
        self.rows.iter().filter(|r| !r.value.is_finite()).collect()
    }

    pub fn select<'a>(&'a self, method: Method, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.metric == metric)
    }

    /// Mean of `metric` for `method` over trial rows in cells matching the
    /// given coordinates (`None` matches anything). Values are summed in
    /// trial order so the result does not depend on execution order.
    pub fn mean(&self, method: Method, metric: &str, p: Option<f64>, delta: Option<f64>, lambda: Option<f64>) -> Option<f64> {
        let matches = |want: Option<f64>, got: Option<f64>| want.is_none() || want == got;
        let mut vals: Vec<(usize, f64)> = self
            .select(method, metric)
            .filter(|r| matches(p, r.p) && matches(delta, r.delta) && matches(lambda, r.lambda))
            .filter_map(|r| r.trial.map(|t| (t, r.value)))
            .collect();
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Some(vals.iter().map(|v| v.1).sum::<f64>() / vals.len() as f64)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| ExpError::csv("results.csv", e))?;
        }
        let bytes = w.into_inner().map_err(|e| ExpError::config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| ExpError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| ExpError::csv(path, e))?;
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(|e| ExpError::csv(path, e))?;
        Ok(Self { rows })
    }

    /// Aggregates trial rows per (experiment, cell, method, metric). Rows
    /// without a trial pass through with `n = 1`. Groups come out sorted by
    /// experiment, cell, method and metric.
    pub fn summarize(&self) -> Vec<SummaryRow> {
        let mut groups: Vec<(GroupKey, Vec<(Option<usize>, f64)>)> = Vec::new();
        for r in &self.rows {
            let key = GroupKey::of(r);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, vals)) => vals.push((r.trial, r.value)),
                None => groups.push((key, vec![(r.trial, r.value)])),
            }
        }
        groups.sort_by(|(a, _), (b, _)| a.cmp(b));
        groups
            .into_iter()
            .filter(|(k, _)| k.metric != metric::FAILED)
            .map(|(key, mut vals)| {
                vals.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
                let failures = self
                    .rows
                    .iter()
                    .filter(|r| r.metric == metric::FAILED && GroupKey::of(r).same_run_cell(&key))
                    .count();
                let n = vals.len();
                let mean = vals.iter().map(|v| v.1).sum::<f64>() / n as f64;
                let var = if n > 1 {
                    vals.iter().map(|v| (v.1 - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                let min = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
                let max = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
                SummaryRow {
                    experiment: key.experiment,
                    p: key.cell.p,
                    delta: key.cell.delta,
                    lambda: key.cell.lambda,
                    method: key.method,
                    metric: key.metric,
                    n,
                    failures,
                    mean,
                    std: var.sqrt(),
                    min,
                    max,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GroupKey {
    experiment: Experiment,
    cell: Cell,
    method: Method,
    metric: String,
}

impl GroupKey {
    fn of(r: &ResultRow) -> Self {
        GroupKey {
            experiment: r.experiment,
            cell: Cell {
                p: r.p,
                delta: r.delta,
                lambda: r.lambda,
            },
            method: r.method,
            metric: r.metric.clone(),
        }
    }

    fn same_run_cell(&self, other: &GroupKey) -> bool {
        self.experiment == other.experiment
            && self.method == other.method
            && self.cell.cmp_key(&other.cell) == Ordering::Equal
    }

    fn cmp(&self, other: &GroupKey) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.cell.cmp_key(&other.cell))
            .then(self.method.cmp(&other.method))
            .then(self.metric.cmp(&other.metric))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: Experiment,
    pub p: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub method: Method,
    pub metric: String,
    /// Rows aggregated (successful runs for per-run metrics).
    pub n: usize,
    /// Runs in this cell and method that returned an error.
    pub failures: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| ExpError::csv("summary.csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| ExpError::config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
