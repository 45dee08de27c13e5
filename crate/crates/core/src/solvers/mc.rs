//! Ambient-space matrix completion baseline: plain gradient descent on
//! `n1 x r` and `n2 x r` factors, no side information and no projection.

use super::config::SolverConfig;
use super::driver::{self, Eval, Objective, Setup};
use super::imc::{balance_term, balanced_factors, data_term, rank_warnings, resolve_step, SpectralInit};
use super::trace::SolverTrace;
use crate::error::{Error, Result};
use crate::matrix::{FactorPair, GroundTruth, ObservationSet};

pub(crate) fn check_dims(f: &FactorPair, obs: &ObservationSet) -> Result<()> {
    if f.a.nrows() != obs.n1() || f.b.nrows() != obs.n2() {
        return Err(Error::dims(format!(
            "factors {}x{} and {}x{} do not fit a {}x{} observation grid",
            f.a.nrows(),
            f.a.ncols(),
            f.b.nrows(),
            f.b.ncols(),
            obs.n1(),
            obs.n2()
        )));
    }
    if f.a.ncols() != f.b.ncols() {
        return Err(Error::dims(format!(
            "A has {} columns but B has {}",
            f.a.ncols(),
            f.b.ncols()
        )));
    }
    Ok(())
}

pub(crate) struct McObjective<'a> {
    pub obs: &'a ObservationSet,
}

impl McObjective<'_> {
    pub(crate) fn eval_parts(&self, f: &FactorPair) -> Eval {
        let (data, res) = data_term(self.obs, &f.a, &f.b);
        let (d, bal) = balance_term(f);
        let inv_p = 1.0 / self.obs.p();
        let grad_a = self.obs.mul(&res, &f.b) * inv_p + &f.a * &d * 0.25;
        let grad_b = self.obs.tr_mul(&res, &f.a) * inv_p - &f.b * &d * 0.25;
        Eval {
            loss: data + bal,
            grad: FactorPair {
                a: grad_a,
                b: grad_b,
            },
            left: f.a.clone(),
            right: f.b.clone(),
        }
    }
}

impl Objective for McObjective<'_> {
    fn eval(&self, f: &FactorPair) -> Eval {
        self.eval_parts(f)
    }

    fn zero_loss(&self) -> f64 {
        self.obs.frob_sq() / (2.0 * self.obs.p())
    }
}

/// `(1/2p) ||P_Omega(A B^T - M)||_F^2 + (1/16) ||A^T A - B^T B||_F^2`.
pub fn mc_loss(f: &FactorPair, obs: &ObservationSet) -> Result<f64> {
    check_dims(f, obs)?;
    let (data, _) = data_term(obs, &f.a, &f.b);
    Ok(data + balance_term(f).1)
}

pub fn mc_gradient(f: &FactorPair, obs: &ObservationSet) -> Result<FactorPair> {
    check_dims(f, obs)?;
    Ok(McObjective { obs }.eval_parts(f).grad)
}

/// Top-`r` SVD of `(1/p) P_Omega(M)`, split evenly between the factors.
/// `seed` drives the start block of the iterative SVD on large grids.
pub fn spectral_init_mc(obs: &ObservationSet, r: usize, seed: u64) -> Result<SpectralInit> {
    if r == 0 || r > obs.n1().min(obs.n2()) {
        return Err(Error::invalid(format!(
            "rank {r} must lie in 1..={}",
            obs.n1().min(obs.n2())
        )));
    }
    let dec = obs.top_svd(1.0 / obs.p(), r, seed)?;
    let warnings = rank_warnings(&dec.s);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(SpectralInit {
        factors: balanced_factors(&dec.u, &dec.s, &dec.v),
        spectral_norm: dec.s[0],
        singular_values: dec.s,
        warnings,
    })
}

pub fn solve_mc(
    obs: &ObservationSet,
    cfg: &SolverConfig,
    truth: Option<&GroundTruth>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.n1() != obs.n1() || t.n2() != obs.n2() {
            return Err(Error::dims("ground truth shape differs from the observation grid"));
        }
    }
    let init = spectral_init_mc(obs, cfg.rank, cfg.seed)?;
    let eta = resolve_step(cfg, &init, truth, (obs.n1(), obs.n2()), 1.0)?;
    let setup = Setup {
        init: init.factors,
        init_spectral_norm: init.spectral_norm,
        step: eta,
        constraint: None,
        warnings: init.warnings,
    };
    driver::descend(&McObjective { obs }, setup, cfg, truth)
}
