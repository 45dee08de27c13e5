//! Scalar summaries of an instance: incoherence, effective noise, errors and
//! the residual left outside the side-information subspaces.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::{self, incoherence_of_bases, GroundTruth, Matrix, ObservationSet, SideInfo};

/// Singular value ratio below which a matrix is treated as having lower rank
/// than requested.
const INCOHERENCE_RANK_TOL: f64 = 1e-12;
/// Relative size of a negative residual still attributed to roundoff.
const RESIDUAL_CLAMP: f64 = 1e-9;

/// `max(n1/r ||U||_{2,inf}^2, n2/r ||V||_{2,inf}^2)` over the top-`r`
/// singular subspaces of `m`. Row norms of `U` are the leverage scores
/// `diag(U U^T)`, so the value does not depend on which SVD basis is returned.
pub fn incoherence(m: &Matrix, r: usize) -> Result<f64> {
    let (n1, n2) = m.shape();
    if r == 0 || r > n1.min(n2) {
        return Err(Error::invalid(format!("rank {r} out of range for a {n1}x{n2} matrix")));
    }
    let dec = matrix::svd(m, Some(r))?;
    let top = dec.s[0];
    if !(dec.s[r - 1] > INCOHERENCE_RANK_TOL * top) {
        return Err(Error::invalid(format!(
            "effective rank below {r}: sigma_{r} = {:.3e}, sigma_1 = {top:.3e}",
            dec.s[r - 1]
        )));
    }
    Ok(incoherence_of_bases(&dec.u, &dec.v))
}

/// `(n1/a1 ||X||_{2,inf}^2, n2/a2 ||Y||_{2,inf}^2)`.
pub fn side_info_incoherence(si: &SideInfo) -> (f64, f64) {
    let mu = |m: &Matrix| {
        let lev = matrix::two_inf_norm(m);
        m.nrows() as f64 / m.ncols() as f64 * lev * lev
    };
    (mu(si.x()), mu(si.y()))
}

/// `(1/p) ||X^T P_Omega(E) Y||`, the noise as seen by the core estimator.
pub fn effective_noise(noise: &ObservationSet, si: &SideInfo) -> Result<f64> {
    if noise.n1() != si.n1() || noise.n2() != si.n2() {
        return Err(Error::dims(format!(
            "noise on a {}x{} grid, side information for {}x{}",
            noise.n1(),
            noise.n2(),
            si.n1(),
            si.n2()
        )));
    }
    if noise.entries().iter().all(|e| e.v == 0.0) {
        return Ok(0.0);
    }
    let w = si.x().tr_mul(&noise.mul(&noise.values(), si.y())) / noise.p();
    matrix::spectral_norm(&w)
}

/// Reference scale `sigma sqrt(max(a1, a2) ln(n) / p)` for the effective
/// noise of i.i.d. Gaussian entries, with `n = max(n1, n2)`.
pub fn effective_noise_scale(sigma: f64, a1: usize, a2: usize, n1: usize, n2: usize, p: f64) -> f64 {
    let n = n1.max(n2) as f64;
    sigma * (a1.max(a2) as f64 * n.ln() / p).sqrt()
}

/// `||L_hat - L*||_F / ||L*||_F`.
pub fn relative_error(l_hat: &Matrix, l_star: &Matrix) -> Result<f64> {
    if l_hat.shape() != l_star.shape() {
        return Err(Error::dims(format!(
            "estimate is {:?}, truth is {:?}",
            l_hat.shape(),
            l_star.shape()
        )));
    }
    let denom = l_star.norm();
    if denom == 0.0 {
        return Err(Error::invalid("relative error against a zero matrix"));
    }
    Ok((l_hat - l_star).norm() / denom)
}

/// `||L - X X^T L Y Y^T||_F`, from `||L||_F^2 - ||X^T L Y||_F^2`.
pub fn misspec_residual(l: &Matrix, si: &SideInfo) -> Result<f64> {
    if l.shape() != (si.n1(), si.n2()) {
        return Err(Error::dims(format!(
            "matrix is {:?} but side information expects {}x{}",
            l.shape(),
            si.n1(),
            si.n2()
        )));
    }
    let total = l.norm_squared();
    let inner = (si.x().tr_mul(l) * si.y()).norm_squared();
    let diff = total - inner;
    if diff < -RESIDUAL_CLAMP * total {
        return Err(Error::invalid(format!(
            "negative residual {diff:.3e} against ||L||_F^2 = {total:.3e}; side information is not orthonormal"
        )));
    }
    Ok(diff.max(0.0).sqrt())
}

/// The quantities the recovery guarantees are stated in, for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceReport {
    pub mu0: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub kappa: f64,
    pub gamma_e: f64,
    pub sample_count: usize,
    /// `n1 n2 p / (kappa^2 max(mu1 a1, mu2 a2) mu0^2 r^2 ln n)`, i.e. the
    /// sample condition with its unknown constant set to 1.
    pub sample_ratio: f64,
}

impl InstanceReport {
    pub const CSV_HEADER: &'static str = "mu0,mu1,mu2,kappa,gamma_E,sample_count,sample_ratio";

    /// `noise` carries the noise values on the observed set (all zero for a
    /// noiseless instance) together with `p`.
    pub fn new(truth: &GroundTruth, si: &SideInfo, noise: &ObservationSet) -> Result<Self> {
        let (mu1, mu2) = side_info_incoherence(si);
        let gamma_e = effective_noise(noise, si)?;
        let (n1, n2) = (truth.n1(), truth.n2());
        let r = truth.rank as f64;
        let eff = (mu1 * si.a1() as f64).max(mu2 * si.a2() as f64);
        let denom = truth.kappa.powi(2) * eff * truth.mu0.powi(2) * r * r * (n1.max(n2) as f64).ln();
        Ok(Self {
            mu0: truth.mu0,
            mu1,
            mu2,
            kappa: truth.kappa,
            gamma_e,
            sample_count: noise.len(),
            sample_ratio: (n1 * n2) as f64 * noise.p() / denom,
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            matrix::csv::fmt_real(self.mu0),
            matrix::csv::fmt_real(self.mu1),
            matrix::csv::fmt_real(self.mu2),
            matrix::csv::fmt_real(self.kappa),
            matrix::csv::fmt_real(self.gamma_e),
            self.sample_count,
            matrix::csv::fmt_real(self.sample_ratio)
        )
    }
}

impl fmt::Display for InstanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "incoherence mu0   {:.4}", self.mu0)?;
        writeln!(f, "side info mu1     {:.4}", self.mu1)?;
        writeln!(f, "side info mu2     {:.4}", self.mu2)?;
        writeln!(f, "condition kappa   {:.4}", self.kappa)?;
        writeln!(f, "effective noise   {:.4e}", self.gamma_e)?;
        writeln!(f, "observed entries  {}", self.sample_count)?;
        write!(f, "sample ratio      {:.4e}", self.sample_ratio)
    }
}
