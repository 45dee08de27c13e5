//! Projected gradient descent with spectral initialization on the factored
//! core `Z = A B^T`.

use super::config::{ProjectionMode, SolverConfig, StepRule};
use super::driver::{self, Constraint, Eval, Objective, Setup};
use super::trace::SolverTrace;
use crate::error::{Error, Result};
use crate::matrix::{self, FactorPair, GroundTruth, Matrix, ObservationSet, SideInfo};

/// Rounds of clip-and-pull-back before falling back to uniform scaling.
const PROJECTION_ROUNDS: usize = 50;
/// Relative slack under which an iterate counts as inside `C`.
const FEASIBILITY_SLACK: f64 = 1e-12;
/// An initializer whose `r`-th singular value is below this fraction of the
/// first is flagged as rank deficient.
const INIT_RANK_WARN: f64 = 1e-14;

pub(crate) fn check_dims(f: &FactorPair, obs: &ObservationSet, si: &SideInfo) -> Result<()> {
    if si.n1() != obs.n1() || si.n2() != obs.n2() {
        return Err(Error::dims(format!(
            "side information ({}x{}, {}x{}) vs observations on a {}x{} grid",
            si.n1(),
            si.a1(),
            si.n2(),
            si.a2(),
            obs.n1(),
            obs.n2()
        )));
    }
    if f.a.nrows() != si.a1() {
        return Err(Error::dims(format!(
            "X is {}x{} but A has {} rows",
            si.n1(),
            si.a1(),
            f.a.nrows()
        )));
    }
    if f.b.nrows() != si.a2() {
        return Err(Error::dims(format!(
            "Y is {}x{} but B has {} rows",
            si.n2(),
            si.a2(),
            f.b.nrows()
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

/// `(1/2p) ||P_Omega(P Q^T - M)||_F^2` together with the residual on Omega.
pub(crate) fn data_term(obs: &ObservationSet, left: &Matrix, right: &Matrix) -> (f64, Vec<f64>) {
    let res = obs.residual_t(&left.transpose(), &right.transpose());
    let sq: f64 = res.iter().map(|r| r * r).sum();
    (sq / (2.0 * obs.p()), res)
}

/// `A^T A - B^T B` and the balancing penalty `(1/16) ||A^T A - B^T B||_F^2`.
pub(crate) fn balance_term(f: &FactorPair) -> (Matrix, f64) {
    let d = f.a.tr_mul(&f.a) - f.b.tr_mul(&f.b);
    let pen = d.norm_squared() / 16.0;
    (d, pen)
}

pub(crate) struct ImcObjective<'a> {
    pub obs: &'a ObservationSet,
    pub si: &'a SideInfo,
}

impl Objective for ImcObjective<'_> {
    fn eval(&self, f: &FactorPair) -> Eval {
        let x = self.si.x();
        let y = self.si.y();
        let left = x * &f.a;
        let right = y * &f.b;
        let (data, res) = data_term(self.obs, &left, &right);
        let (d, bal) = balance_term(f);
        let inv_p = 1.0 / self.obs.p();
        let sq = self.obs.mul(&res, &right);
        let stp = self.obs.tr_mul(&res, &left);
        let grad_a = x.tr_mul(&sq) * inv_p + &f.a * &d * 0.25;
        let grad_b = y.tr_mul(&stp) * inv_p - &f.b * &d * 0.25;
        Eval {
            loss: data + bal,
            grad: FactorPair {
                a: grad_a,
                b: grad_b,
            },
            left,
            right,
        }
    }

    fn zero_loss(&self) -> f64 {
        self.obs.frob_sq() / (2.0 * self.obs.p())
    }
}

/// `(1/2p) ||P_Omega(X A B^T Y^T - M)||_F^2 + (1/16) ||A^T A - B^T B||_F^2`.
pub fn imc_loss(f: &FactorPair, obs: &ObservationSet, si: &SideInfo) -> Result<f64> {
    check_dims(f, obs, si)?;
    let (data, _) = data_term(obs, &(si.x() * &f.a), &(si.y() * &f.b));
    Ok(data + balance_term(f).1)
}

/// Gradient of [`imc_loss`] with respect to `A` and `B`.
pub fn imc_gradient(f: &FactorPair, obs: &ObservationSet, si: &SideInfo) -> Result<FactorPair> {
    check_dims(f, obs, si)?;
    Ok(ImcObjective { obs, si }.eval(f).grad)
}

/// Result of a spectral initialization.
#[derive(Debug, Clone)]
pub struct SpectralInit {
    pub factors: FactorPair,
    /// `||Z0||`, the top singular value of the initializer.
    pub spectral_norm: f64,
    /// All `r` retained singular values.
    pub singular_values: Vec<f64>,
    pub warnings: Vec<String>,
}

pub(crate) fn balanced_factors(u: &Matrix, s: &[f64], v: &Matrix) -> FactorPair {
    let mut a = u.clone();
    let mut b = v.clone();
    for (j, &sj) in s.iter().enumerate() {
        let root = sj.sqrt();
        a.column_mut(j).scale_mut(root);
        b.column_mut(j).scale_mut(root);
    }
    FactorPair { a, b }
}

pub(crate) fn rank_warnings(s: &[f64]) -> Vec<String> {
    let r = s.len();
    match (s.first(), s.last()) {
        (Some(&top), Some(&last)) if last < INIT_RANK_WARN * top || top == 0.0 => {
            vec![format!(
                "rank-deficient initialization: sigma_{r} = {last:.3e} vs sigma_1 = {top:.3e}"
            )]
        }
        _ => Vec::new(),
    }
}

/// Top-`r` SVD of `W = (1/p) X^T P_Omega(M) Y`, split evenly between the
/// factors: `A0 = U0 S0^{1/2}`, `B0 = V0 S0^{1/2}`.
pub fn spectral_init_imc(obs: &ObservationSet, si: &SideInfo, r: usize) -> Result<SpectralInit> {
    check_dims(&FactorPair::zeros(si.a1(), si.a2(), r.max(1)), obs, si)?;
    if r == 0 || r > si.a1().min(si.a2()) {
        return Err(Error::invalid(format!(
            "rank {r} must lie in 1..={}",
            si.a1().min(si.a2())
        )));
    }
    let w = si.x().tr_mul(&obs.mul(&obs.values(), si.y())) / obs.p();
    let dec = matrix::svd(&w, Some(r))?;
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

/// `2 sqrt(mu0 r / n_min) ||Z0||`.
pub fn projection_radius(mu0: f64, r: usize, n_min: usize, z0_norm: f64) -> f64 {
    2.0 * (mu0 * r as f64 / n_min as f64).sqrt() * z0_norm
}

/// Maps `(A, B)` into `C = { ||XA||_{2,inf} <= radius, ||YB||_{2,inf} <= radius }`.
///
/// Feasible points come back untouched with `false`. Otherwise each factor
/// alternates between clipping the rows of `XA` to `radius` and pulling back
/// through `X^T`; if that has not reached `C` after a fixed number of rounds
/// the factor is scaled down uniformly. Returns `true` whenever the point
/// moved.
pub fn project_c(f: &FactorPair, si: &SideInfo, radius: f64) -> (FactorPair, bool) {
    let lim = radius * (1.0 + FEASIBILITY_SLACK);
    let xa = si.x() * &f.a;
    let yb = si.y() * &f.b;
    let in_a = matrix::two_inf_norm(&xa) <= lim;
    let in_b = matrix::two_inf_norm(&yb) <= lim;
    if in_a && in_b {
        return (f.clone(), false);
    }
    let a = if in_a { f.a.clone() } else { project_block(&f.a, si.x(), xa, radius) };
    let b = if in_b { f.b.clone() } else { project_block(&f.b, si.y(), yb, radius) };
    (FactorPair { a, b }, true)
}

fn project_block(start: &Matrix, basis: &Matrix, lifted: Matrix, radius: f64) -> Matrix {
    let lim = radius * (1.0 + FEASIBILITY_SLACK);
    let mut w = lifted;
    let mut a = start.clone();
    for _ in 0..PROJECTION_ROUNDS {
        for (i, norm_sq) in matrix::row_norms_sq(&w).into_iter().enumerate() {
            let norm = norm_sq.sqrt();
            if norm > radius {
                w.row_mut(i).scale_mut(radius / norm);
            }
        }
        a = basis.tr_mul(&w);
        w = basis * &a;
        if matrix::two_inf_norm(&w) <= lim {
            return a;
        }
    }
    let top = matrix::two_inf_norm(&w);
    if top > 0.0 {
        a * (radius / top)
    } else {
        a
    }
}

/// `1 / (480000 (n / n_min)^2 mu0^2 r^2 kappa sigma_max)`.
pub fn conservative_step(n1: usize, n2: usize, mu0: f64, r: usize, kappa: f64, sigma_max: f64) -> f64 {
    let ratio = n1.max(n2) as f64 / n1.min(n2) as f64;
    let r = r as f64;
    1.0 / (480_000.0 * ratio * ratio * mu0 * mu0 * r * r * kappa * sigma_max)
}

pub(crate) fn resolve_mu0(cfg: &SolverConfig, truth: Option<&GroundTruth>, n_min: usize) -> f64 {
    cfg.mu0_hint
        .or(truth.map(|t| t.mu0))
        .unwrap_or(n_min as f64 / cfg.rank as f64)
}

pub(crate) fn resolve_step(
    cfg: &SolverConfig,
    init: &SpectralInit,
    truth: Option<&GroundTruth>,
    dims: (usize, usize),
    curvature_boost: f64,
) -> Result<f64> {
    let top = init.spectral_norm;
    let eta = match cfg.step {
        StepRule::Fixed(eta) => eta,
        StepRule::Spectral { scale } => {
            if !(top > 0.0) {
                return Err(Error::invalid(
                    "spectral initializer is zero; cannot size the step from it",
                ));
            }
            scale / (top * curvature_boost)
        }
        StepRule::Conservative => {
            let n_min = dims.0.min(dims.1);
            let mu0 = resolve_mu0(cfg, truth, n_min);
            let (kappa, sigma_max) = match truth {
                Some(t) => (t.kappa, t.sigma_max),
                None => {
                    let last = init.singular_values.last().copied().unwrap_or(0.0);
                    if !(last > 0.0) {
                        return Err(Error::invalid(
                            "cannot estimate the condition number from a rank-deficient initializer",
                        ));
                    }
                    (top / last, top)
                }
            };
            conservative_step(dims.0, dims.1, mu0, cfg.rank, kappa, sigma_max) / curvature_boost
        }
    };
    Ok(eta)
}

/// Spectral initialization followed by (projected) gradient descent on
/// [`imc_loss`].
pub fn solve_imc(
    obs: &ObservationSet,
    si: &SideInfo,
    cfg: &SolverConfig,
    truth: Option<&GroundTruth>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.n1() != obs.n1() || t.n2() != obs.n2() {
            return Err(Error::dims("ground truth shape differs from the observation grid"));
        }
    }
    let init = spectral_init_imc(obs, si, cfg.rank)?;
    let eta = resolve_step(cfg, &init, truth, (obs.n1(), obs.n2()), 1.0)?;
    let n_min = obs.n1().min(obs.n2());
    let constraint = (cfg.projection != ProjectionMode::Off).then(|| Constraint {
        si,
        radius: projection_radius(resolve_mu0(cfg, truth, n_min), cfg.rank, n_min, init.spectral_norm),
        mode: cfg.projection,
    });
    let setup = Setup {
        init: init.factors,
        init_spectral_norm: init.spectral_norm,
        step: eta,
        constraint,
        warnings: init.warnings,
    };
    driver::descend(&ImcObjective { obs, si }, setup, cfg, truth)
}
