//! Ambient-space factored completion with a penalty on the part of the
//! estimate that leaves the side-information subspaces. `lambda = 0` is the
//! plain baseline; large `lambda` pushes the estimate into `col(X) x col(Y)`.

use super::config::SolverConfig;
use super::driver::{self, Eval, Objective, Setup};
use super::imc::resolve_step;
use super::mc::{self, spectral_init_mc, McObjective};
use super::trace::SolverTrace;
use crate::error::{Error, Result};
use crate::matrix::{FactorPair, GroundTruth, Matrix, ObservationSet, SideInfo};

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda must be a finite value >= 0, got {lambda}")))
    }
}

fn check_dims(f: &FactorPair, obs: &ObservationSet, si: &SideInfo) -> Result<()> {
    mc::check_dims(f, obs)?;
    if si.n1() != obs.n1() || si.n2() != obs.n2() {
        return Err(Error::dims(format!(
            "side information spans R^{} x R^{} but observations are on a {}x{} grid",
            si.n1(),
            si.n2(),
            obs.n1(),
            obs.n2()
        )));
    }
    Ok(())
}

/// Penalty pieces expressed through `C_A = X^T A`, `C_B = Y^T B` so that no
/// `n1 x n2` matrix is formed.
struct PenaltyParts {
    c_a: Matrix,
    c_b: Matrix,
    gram_a: Matrix,
    gram_b: Matrix,
    proj_gram_a: Matrix,
    proj_gram_b: Matrix,
}

impl PenaltyParts {
    fn new(f: &FactorPair, si: &SideInfo) -> Self {
        let c_a = si.x().tr_mul(&f.a);
        let c_b = si.y().tr_mul(&f.b);
        Self {
            gram_a: f.a.tr_mul(&f.a),
            gram_b: f.b.tr_mul(&f.b),
            proj_gram_a: c_a.tr_mul(&c_a),
            proj_gram_b: c_b.tr_mul(&c_b),
            c_a,
            c_b,
        }
    }

    /// `||A B^T||_F^2 - ||C_A C_B^T||_F^2 = ||A B^T - X X^T A B^T Y Y^T||_F^2`.
    fn value(&self) -> f64 {
        let full = self.gram_a.component_mul(&self.gram_b).sum();
        let inner = self.proj_gram_a.component_mul(&self.proj_gram_b).sum();
        (full - inner).max(0.0)
    }
}

/// `||A B^T - X X^T A B^T Y Y^T||_F^2` via the factored identity.
pub fn side_penalty(f: &FactorPair, si: &SideInfo) -> f64 {
    PenaltyParts::new(f, si).value()
}

pub(crate) struct InterpObjective<'a> {
    pub obs: &'a ObservationSet,
    pub si: &'a SideInfo,
    pub lambda: f64,
}

impl Objective for InterpObjective<'_> {
    fn eval(&self, f: &FactorPair) -> Eval {
        let mut eval = McObjective { obs: self.obs }.eval_parts(f);
        if self.lambda == 0.0 {
            return eval;
        }
        let parts = PenaltyParts::new(f, self.si);
        eval.loss += self.lambda * parts.value();
        // S = A B^T - X C_A C_B^T Y^T is already orthogonal to col(X) x col(Y),
        // so d/dA = 2 lambda S B and d/dB = 2 lambda S^T A.
        let two_l = 2.0 * self.lambda;
        let sb = &f.a * &parts.gram_b - self.si.x() * (&parts.c_a * &parts.proj_gram_b);
        let sta = &f.b * &parts.gram_a - self.si.y() * (&parts.c_b * &parts.proj_gram_a);
        eval.grad.a += sb * two_l;
        eval.grad.b += sta * two_l;
        eval
    }

    fn zero_loss(&self) -> f64 {
        self.obs.frob_sq() / (2.0 * self.obs.p())
    }
}

/// Baseline loss plus `lambda ||A B^T - X X^T A B^T Y Y^T||_F^2`.
pub fn interp_loss(f: &FactorPair, obs: &ObservationSet, si: &SideInfo, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    check_dims(f, obs, si)?;
    let base = mc::mc_loss(f, obs)?;
    if lambda == 0.0 {
        return Ok(base);
    }
    Ok(base + lambda * side_penalty(f, si))
}

pub fn interp_gradient(
    f: &FactorPair,
    obs: &ObservationSet,
    si: &SideInfo,
    lambda: f64,
) -> Result<FactorPair> {
    check_lambda(lambda)?;
    check_dims(f, obs, si)?;
    Ok(InterpObjective { obs, si, lambda }.eval(f).grad)
}

/// Gradient descent on [`interp_loss`] from the ambient spectral initializer.
pub fn solve_interp(
    obs: &ObservationSet,
    si: &SideInfo,
    lambda: f64,
    cfg: &SolverConfig,
    truth: Option<&GroundTruth>,
) -> Result<SolverTrace> {
    check_lambda(lambda)?;
    cfg.validate()?;
    if si.n1() != obs.n1() || si.n2() != obs.n2() {
        return Err(Error::dims("side information does not match the observation grid"));
    }
    if let Some(t) = truth {
        if t.n1() != obs.n1() || t.n2() != obs.n2() {
            return Err(Error::dims("ground truth shape differs from the observation grid"));
        }
    }
    let init = spectral_init_mc(obs, cfg.rank, cfg.seed)?;
    let eta = resolve_step(cfg, &init, truth, (obs.n1(), obs.n2()), 1.0 + 2.0 * lambda)?;
    let setup = Setup {
        init: init.factors,
        init_spectral_norm: init.spectral_norm,
        step: eta,
        constraint: None,
        warnings: init.warnings,
    };
    driver::descend(&InterpObjective { obs, si, lambda }, setup, cfg, truth)
}
