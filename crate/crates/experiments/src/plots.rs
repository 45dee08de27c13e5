//! Per-figure data files and Vega-Lite specifications.
//!
//! Each figure is a small CSV derived from the summary plus a JSON spec
//! that reads it by relative URL, so any Vega-Lite renderer can draw it
//! without this crate linking a plotting library.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::Experiment;
use crate::error::{ExpError, Result};
use crate::table::{metric, Method, ResultTable, SummaryRow};

const SCHEMA: &str = "https://vega.github.io/schema/vega-lite/v5.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub id: String,
    pub csv: String,
    pub spec: Value,
}

impl Figure {
    pub fn spec_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)? + "\n")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn rows<'a>(s: &'a [SummaryRow], e: Experiment, m: &'a str) -> impl Iterator<Item = &'a SummaryRow> + 'a {
    s.iter().filter(move |r| r.experiment == e && r.metric == m)
}

fn line_chart(id: &str, title: &str, x: (&str, &str), y: (&str, &str), color: &str, log_y: bool) -> Value {
    let mut yenc = json!({"field": y.0, "type": "quantitative", "title": y.1});
    if log_y {
        yenc["scale"] = json!({"type": "log"});
    }
    json!({
        "$schema": SCHEMA,
        "title": title,
        "data": {"url": format!("{id}.csv")},
        "mark": {"type": "line", "point": true},
        "encoding": {
            "x": {"field": x.0, "type": "quantitative", "title": x.1},
            "y": yenc,
            "color": {"field": color, "type": "nominal"}
        }
    })
}

/// Figures for every experiment present in `table`, in experiment order.
pub fn figures(table: &ResultTable) -> Vec<Figure> {
    let summary = table.summarize();
    let mut present: Vec<Experiment> = table.rows.iter().map(|r| r.experiment).collect();
    present.sort();
    present.dedup();
    present.into_iter().map(|e| figure_for(e, &summary)).collect()
}

fn figure_for(e: Experiment, s: &[SummaryRow]) -> Figure {
    let id = e.id();
    let mut csv = String::new();
    let spec = match e {
        Experiment::Phase | Experiment::PhaseImcFine => {
            csv.push_str("p,method,success_rate,runs,failures\n");
            for r in rows(s, e, metric::SUCCESS) {
                let _ = writeln!(csv, "{},{},{},{},{}", opt(r.p), r.method, r.mean, r.n, r.failures);
            }
            line_chart(id, "Exact recovery rate", ("p", "sampling rate p"), ("success_rate", "success rate"), "method", false)
        }
        Experiment::NoisyError => {
            csv.push_str("p,method,mean_rel_error,std,runs,failures\n");
            for r in rows(s, e, metric::REL_ERROR) {
                let _ = writeln!(csv, "{},{},{},{},{},{}", opt(r.p), r.method, r.mean, r.std, r.n, r.failures);
            }
            line_chart(id, "Relative error, exact side information", ("p", "sampling rate p"), ("mean_rel_error", "relative error"), "method", true)
        }
        Experiment::InexactError => {
            csv.push_str("p,delta,method,mean_rel_error,std,runs,failures\n");
            for r in rows(s, e, metric::REL_ERROR) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    opt(r.p),
                    opt(r.delta),
                    r.method,
                    r.mean,
                    r.std,
                    r.n,
                    r.failures
                );
            }
            let mut spec = line_chart(id, "Relative error, inexact side information", ("p", "sampling rate p"), ("mean_rel_error", "relative error"), "method", true);
            spec["encoding"]["column"] = json!({"field": "delta", "type": "ordinal", "title": "delta"});
            spec
        }
        Experiment::DeltaSweep => {
            csv.push_str("p,delta,mean_rel_error,std,misspec_bound\n");
            for r in rows(s, e, metric::REL_ERROR).filter(|r| r.method == Method::Imc) {
                let bound = rows(s, e, metric::MISSPEC_BOUND)
                    .find(|b| b.delta == r.delta)
                    .map(|b| b.mean);
                let _ = writeln!(csv, "{},{},{},{},{}", opt(r.p), opt(r.delta), r.mean, r.std, opt(bound));
            }
            let mut spec = line_chart(id, "IMC error against side-information distance", ("delta", "delta"), ("mean_rel_error", "relative error"), "p", false);
            spec["encoding"]["color"]["type"] = json!("ordinal");
            spec
        }
        Experiment::InterpSweep => {
            csv.push_str("p,lambda,mean_rel_error,std,runs,failures\n");
            for r in rows(s, e, metric::REL_ERROR).filter(|r| r.method == Method::Interp) {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    opt(r.p),
                    opt(r.lambda),
                    r.mean,
                    r.std,
                    r.n,
                    r.failures
                );
            }
            let mut spec = line_chart(id, "Interpolation error across the penalty grid", ("lambda", "lambda"), ("mean_rel_error", "relative error"), "p", true);
            spec["encoding"]["x"]["scale"] = json!({"type": "symlog", "constant": 1e-4});
            spec["encoding"]["color"]["type"] = json!("ordinal");
            spec
        }
        Experiment::InterpCv => {
            csv.push_str("p,method,mean_rel_error,std,runs,failures\n");
            for r in rows(s, e, metric::REL_ERROR) {
                let _ = writeln!(csv, "{},{},{},{},{},{}", opt(r.p), r.method, r.mean, r.std, r.n, r.failures);
            }
            json!({
                "$schema": SCHEMA,
                "title": "Cross-validated interpolation against IMC and MC",
                "data": {"url": format!("{id}.csv")},
                "mark": "bar",
                "encoding": {
                    "x": {"field": "method", "type": "nominal"},
                    "y": {"field": "mean_rel_error", "type": "quantitative", "title": "relative error", "scale": {"type": "log"}},
                    "column": {"field": "p", "type": "ordinal"},
                    "color": {"field": "method", "type": "nominal"}
                }
            })
        }
        Experiment::ProjectionCheck => {
            csv.push_str("p,max_ratio_a,max_ratio_b\n");
            let a: Vec<_> = rows(s, e, metric::MAX_RATIO_A).collect();
            let b: Vec<_> = rows(s, e, metric::MAX_RATIO_B).collect();
            for (ra, rb) in a.iter().zip(&b) {
                let _ = writeln!(csv, "{},{},{}", opt(ra.p), ra.max, rb.max);
            }
            json!({
                "$schema": SCHEMA,
                "title": "Factor row norms relative to the constraint radius",
                "data": {"url": "../projection_trace.csv"},
                "transform": [{"fold": ["ratio_a", "ratio_b"], "as": ["factor", "ratio"]}],
                "layer": [
                    {
                        "mark": {"type": "line", "opacity": 0.4},
                        "encoding": {
                            "x": {"field": "iter", "type": "quantitative"},
                            "y": {"field": "ratio", "type": "quantitative", "title": "norm / radius"},
                            "detail": {"field": "trial", "type": "nominal"},
                            "color": {"field": "factor", "type": "nominal"}
                        }
                    },
                    {"mark": {"type": "rule", "strokeDash": [4, 4]}, "encoding": {"y": {"datum": 1}}}
                ]
            })
        }
        Experiment::Movielens => {
            csv.push_str("m,method,mean_rmse,std,runs,failures\n");
            for r in rows(s, e, metric::RMSE) {
                let m = rows(s, e, metric::TRAIN_SIZE).find(|t| t.p == r.p).map(|t| t.mean);
                let _ = writeln!(csv, "{},{},{},{},{},{}", opt(m), r.method, r.mean, r.std, r.n, r.failures);
            }
            line_chart(id, "Test RMSE on MovieLens", ("m", "training ratings"), ("mean_rmse", "test RMSE"), "method", false)
        }
    };
    Figure {
        id: id.to_string(),
        csv,
        spec,
    }
}

/// Writes `<id>.csv` and `<id>.vl.json` for each figure under `dir`.
pub fn emit_plots(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    let mut written = Vec::new();
    for fig in figures(table) {
        let csv_path = dir.join(format!("{}.csv", fig.id));
        fs::write(&csv_path, &fig.csv).map_err(|e| ExpError::io(&csv_path, e))?;
        let spec_path = dir.join(format!("{}.vl.json", fig.id));
        fs::write(&spec_path, fig.spec_json()?).map_err(|e| ExpError::io(&spec_path, e))?;
        written.push(csv_path);
        written.push(spec_path);
    }
    Ok(written)
}
