use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::csv::fmt_real;
use crate::matrix::{FactorPair, Matrix};

pub const TRACE_HEADER: &str = "iter,loss,rel_error,two_inf_A,two_inf_B,projection_active";

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub rel_error: Option<f64>,
    /// `||X A||_{2,inf}` (`||A||_{2,inf}` for ambient solvers).
    pub two_inf_a: f64,
    pub two_inf_b: f64,
    pub projection_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    RelTol,
    LossFloor,
    /// Backtracking found no step that lowers the loss.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub records: Vec<IterRecord>,
    pub factors: FactorPair,
    /// Final estimate `L_hat` (`n1 x n2`).
    pub estimate: Matrix,
    /// Step size in force at the end of the run.
    pub step_size: f64,
    /// Times the step was halved after a loss increase.
    pub step_halvings: usize,
    /// Top singular value of the spectral initializer.
    pub init_spectral_norm: f64,
    /// Radius of the constraint set, when the solver has one.
    pub radius: Option<f64>,
    pub stop: StopReason,
    pub warnings: Vec<String>,
    /// Threads used by the matrix kernels during the run.
    pub threads: usize,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn projection_ever_active(&self) -> bool {
        self.records.iter().any(|r| r.projection_active)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let err = r.rel_error.map(fmt_real).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                fmt_real(r.loss),
                err,
                fmt_real(r.two_inf_a),
                fmt_real(r.two_inf_b),
                r.projection_active
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
