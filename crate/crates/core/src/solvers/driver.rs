//! The gradient-descent loop shared by every solver.

use super::config::{ProjectionMode, SolverConfig};
use super::imc::project_c;
use super::trace::{IterRecord, SolverTrace, StopReason};
use crate::error::{Error, Result};
use crate::matrix::{self, FactorPair, GroundTruth, Matrix, SideInfo};

/// A run is declared divergent once the loss exceeds this multiple of the
/// initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
/// Halvings after which a backtracking run stops as stalled.
const MAX_HALVINGS: usize = 60;
/// Relative loss increase tolerated as roundoff before the step is halved.
const INCREASE_SLACK: f64 = 1e-12;

/// Objective value, gradient and ambient factors `(P, Q)` with
/// `L = P Q^T` at one point.
pub(crate) struct Eval {
    pub loss: f64,
    pub grad: FactorPair,
    pub left: Matrix,
    pub right: Matrix,
}

pub(crate) trait Objective {
    fn eval(&self, f: &FactorPair) -> Eval;
    /// Loss of the zero factors; scales the loss floor.
    fn zero_loss(&self) -> f64;
}

pub(crate) struct Constraint<'a> {
    pub si: &'a SideInfo,
    pub radius: f64,
    pub mode: ProjectionMode,
}

pub(crate) struct Setup<'a> {
    pub init: FactorPair,
    pub init_spectral_norm: f64,
    pub step: f64,
    pub constraint: Option<Constraint<'a>>,
    pub warnings: Vec<String>,
}

struct ErrorTracker {
    p_star: Matrix,
    q_star: Matrix,
    norm: f64,
}

impl ErrorTracker {
    fn new(truth: &GroundTruth) -> Self {
        let amb = truth.ambient_factors();
        Self {
            p_star: amb.a,
            q_star: amb.b,
            norm: truth.l_star.norm(),
        }
    }

    /// `||P Q^T - P* Q*^T||_F / ||L*||_F` through the stacked factorization
    /// `[P, -P*] [Q, Q*]^T`.
    fn rel_error(&self, p: &Matrix, q: &Matrix) -> f64 {
        let r = p.ncols();
        let rs = self.p_star.ncols();
        let mut left = Matrix::zeros(p.nrows(), r + rs);
        left.columns_mut(0, r).copy_from(p);
        left.columns_mut(r, rs).copy_from(&(-&self.p_star));
        let mut right = Matrix::zeros(q.nrows(), r + rs);
        right.columns_mut(0, r).copy_from(q);
        right.columns_mut(r, rs).copy_from(&self.q_star);
        matrix::factored_frob(&left, &right) / self.norm
    }
}

pub(crate) fn descend<O: Objective>(
    obj: &O,
    setup: Setup<'_>,
    cfg: &SolverConfig,
    truth: Option<&GroundTruth>,
) -> Result<SolverTrace> {
    let tracker = truth.filter(|_| cfg.track_error).map(ErrorTracker::new);
    let mut eta = setup.step;
    let mut halvings = 0;
    let floor = cfg.loss_floor * obj.zero_loss();

    let mut factors = setup.init;
    let mut active = false;
    if let Some(c) = &setup.constraint {
        if c.mode == ProjectionMode::Enforce {
            let (projected, moved) = project_c(&factors, c.si, c.radius);
            factors = projected;
            active = moved;
        }
    }
    let mut eval = obj.eval(&factors);
    if !eval.loss.is_finite() {
        return Err(Error::NonFinite("initial loss"));
    }
    let record = |iter: usize, eval: &Eval, active: bool| IterRecord {
        iter,
        loss: eval.loss,
        rel_error: tracker.as_ref().map(|t| t.rel_error(&eval.left, &eval.right)),
        two_inf_a: matrix::two_inf_norm(&eval.left),
        two_inf_b: matrix::two_inf_norm(&eval.right),
        projection_active: active,
    };
    let monitor_active = |rec: &IterRecord| match &setup.constraint {
        Some(c) if c.mode == ProjectionMode::Monitor => {
            let lim = c.radius * (1.0 + 1e-12);
            rec.two_inf_a > lim || rec.two_inf_b > lim
        }
        _ => false,
    };

    let mut first = record(0, &eval, active);
    first.projection_active |= monitor_active(&first);
    let mut records = vec![first];
    let initial = eval.loss;
    let limit = DIVERGENCE_FACTOR * initial;
    let mut stop = StopReason::MaxIters;

    if eval.loss <= floor {
        stop = StopReason::LossFloor;
    } else {
        let mut iter = 0;
        while iter < cfg.max_iters {
            let mut next = factors.step(&eval.grad, eta);
            let mut active = false;
            if let Some(c) = &setup.constraint {
                if c.mode == ProjectionMode::Enforce {
                    let (projected, moved) = project_c(&next, c.si, c.radius);
                    next = projected;
                    active = moved;
                }
            }
            let next_eval = obj.eval(&next);
            let rose = !next_eval.loss.is_finite() || next_eval.loss > eval.loss * (1.0 + INCREASE_SLACK);
            if cfg.backtrack && rose {
                if halvings == MAX_HALVINGS {
                    // no step size lowers the loss: roundoff floor or a stationary point
                    stop = StopReason::Stalled;
                    break;
                }
                halvings += 1;
                eta *= 0.5;
                continue;
            }
            iter += 1;
            if !next_eval.loss.is_finite() || next_eval.loss > limit {
                return Err(Error::Diverged {
                    iter,
                    loss: next_eval.loss,
                    initial,
                    limit: DIVERGENCE_FACTOR,
                    step_size: eta,
                });
            }
            let mut rec = record(iter, &next_eval, active);
            rec.projection_active |= monitor_active(&rec);
            records.push(rec);
            let prev = eval.loss;
            factors = next;
            eval = next_eval;
            if eval.loss <= floor {
                stop = StopReason::LossFloor;
                break;
            }
            if prev > 0.0 && (prev - eval.loss).abs() / prev < cfg.rel_tol {
                stop = StopReason::RelTol;
                break;
            }
        }
    }

    let estimate = &eval.left * eval.right.transpose();
    Ok(SolverTrace {
        records,
        factors,
        estimate,
        step_size: eta,
        step_halvings: halvings,
        init_spectral_norm: setup.init_spectral_norm,
        radius: setup.constraint.as_ref().map(|c| c.radius),
        stop,
        warnings: setup.warnings,
        threads: 1,
    })
}
