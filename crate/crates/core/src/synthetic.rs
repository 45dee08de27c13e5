//! Planted instances: ground truth, sampling, noise, and side information
//! with a prescribed set of principal angles to the true subspaces.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{self, Entry, GroundTruth, Matrix, ObservationSet, SideInfo};

/// Redraws allowed when a Gaussian block comes out numerically rank deficient.
const MAX_REDRAWS: usize = 8;
/// Inputs to the angle routines must be orthonormal to this tolerance.
pub const ANGLE_INPUT_TOL: f64 = 1e-8;

/// Seeded generator with independent streams. The same `(seed, stream)` pair
/// yields the same sequence on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            seed,
            stream,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on a stream derived from this one and `tag`. Does
    /// not advance `self`.
    pub fn fork(&self, tag: u64) -> Rng {
        Rng::new(self.seed, splitmix(self.stream ^ splitmix(tag.wrapping_add(0x9e37_79b9))))
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard Gaussian matrix, filled row by row.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let entries: Vec<f64> = (0..rows * cols).map(|_| self.normal()).collect();
        Matrix::from_row_slice(rows, cols, &entries)
    }

    pub fn core(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    let mut last = None;
    for _ in 0..MAX_REDRAWS {
        match matrix::orthonormalize(&rng.gaussian_matrix(rows, cols)) {
            Ok(q) => return Ok(q),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one draw"))
}

/// Planted instance with Gaussian-then-orthonormalized `X*`, `Y*` and core
/// `Z = G1 G2^T / ||G1 G2^T||` of rank `r` and spectral norm 1. Returns the
/// truth and the exact side information `(X*, Y*)`.
pub fn gen_ground_truth(
    n1: usize,
    n2: usize,
    a1: usize,
    a2: usize,
    r: usize,
    rng: &mut Rng,
) -> Result<(GroundTruth, SideInfo)> {
    if r == 0 || r > a1.min(a2) || a1 > n1 || a2 > n2 {
        return Err(Error::invalid(format!(
            "need 1 <= r <= min(a1, a2), a1 <= n1, a2 <= n2; got n=({n1},{n2}) a=({a1},{a2}) r={r}"
        )));
    }
    let x = random_orthonormal(n1, a1, rng)?;
    let y = random_orthonormal(n2, a2, rng)?;
    let mut last = None;
    for _ in 0..MAX_REDRAWS {
        let g1 = rng.gaussian_matrix(a1, r);
        let g2 = rng.gaussian_matrix(a2, r);
        let core = &g1 * g2.transpose();
        let norm = matrix::spectral_norm(&core)?;
        match GroundTruth::new(x.clone(), y.clone(), core / norm, r) {
            Ok(truth) => {
                let si = truth.exact_side_info();
                return Ok((truth, si));
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one draw"))
}

/// Bernoulli(`p`) sample of the `n1 x n2` index grid, in row-major order.
pub fn sample_omega(n1: usize, n2: usize, p: f64, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("sampling probability must lie in (0, 1], got {p}")));
    }
    let mut out = Vec::with_capacity(((n1 * n2) as f64 * p * 1.1) as usize + 16);
    for i in 0..n1 {
        for j in 0..n2 {
            if p >= 1.0 || rng.uniform() < p {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// i.i.d. `N(0, sigma^2)` noise on `omega`, held as an observation set.
pub fn gaussian_noise(
    n1: usize,
    n2: usize,
    omega: &[(usize, usize)],
    p: f64,
    sigma: f64,
    rng: &mut Rng,
) -> Result<ObservationSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise level must be >= 0, got {sigma}")));
    }
    let entries = omega
        .iter()
        .map(|&(i, j)| Entry {
            i,
            j,
            v: if sigma == 0.0 { 0.0 } else { sigma * rng.normal() },
        })
        .collect();
    ObservationSet::new(n1, n2, p, entries)
}

/// `P_Omega(L* + E)` given the noise already drawn on `omega`.
pub fn observe(l_star: &Matrix, noise: &ObservationSet) -> Result<ObservationSet> {
    if l_star.shape() != (noise.n1(), noise.n2()) {
        return Err(Error::dims("noise grid differs from the ground truth shape"));
    }
    let vals: Vec<f64> = noise
        .entries()
        .iter()
        .map(|e| l_star[(e.i, e.j)] + e.v)
        .collect();
    noise.with_values(&vals)
}

/// `M = P_Omega(L* + E)` with `E_ij ~ N(0, sigma^2)`; `sigma = 0` gives the
/// noiseless observations.
pub fn add_noise(
    l_star: &Matrix,
    omega: &[(usize, usize)],
    p: f64,
    sigma: f64,
    rng: &mut Rng,
) -> Result<ObservationSet> {
    let noise = gaussian_noise(l_star.nrows(), l_star.ncols(), omega, p, sigma, rng)?;
    observe(l_star, &noise)
}

/// Side information at a prescribed distance from the true subspace.
#[derive(Debug, Clone)]
pub struct InexactBasis {
    /// Orthonormal `n x a` basis.
    pub x: Matrix,
    /// Principal angles to `col(U*)`, ascending; the largest is `arcsin(delta)`.
    pub angles: Vec<f64>,
}

/// Builds `X` (`n x a`) whose principal angles to `col(U*)` are
/// `theta_1 <= ... <= theta_r = arcsin(delta)`, the first `r - 1` drawn
/// uniformly from `[0, arcsin(delta)]`.
///
/// Column `i <= r` is `cos(theta_i) u*_i + sin(theta_i) w_i` for an orthonormal
/// `W` orthogonal to `U*`; the remaining `a - r` columns are further random
/// directions orthogonal to both.
pub fn gen_inexact_side_info(u_star: &Matrix, a: usize, delta: f64, rng: &mut Rng) -> Result<InexactBasis> {
    let n = u_star.nrows();
    let r = u_star.ncols();
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid(format!("inexactness must lie in [0, 1], got {delta}")));
    }
    if r == 0 || a < r || a + r > n {
        return Err(Error::invalid(format!(
            "need r <= a <= n - r for the complement directions; got n={n}, a={a}, r={r}"
        )));
    }
    check_orthonormal(u_star, "U*")?;
    let top = delta.asin();
    let mut angles: Vec<f64> = (0..r - 1).map(|_| top * rng.uniform()).collect();
    angles.sort_by(f64::total_cmp);
    angles.push(top);

    let w1 = orthogonal_complement_draw(&[u_star], r, rng)?;
    let w2 = if a > r {
        Some(orthogonal_complement_draw(&[u_star, &w1], a - r, rng)?)
    } else {
        None
    };
    let mut x = Matrix::zeros(n, a);
    for (i, &theta) in angles.iter().enumerate() {
        let col = u_star.column(i) * theta.cos() + w1.column(i) * theta.sin();
        x.set_column(i, &col);
    }
    if let Some(w2) = w2 {
        x.columns_mut(r, a - r).copy_from(&w2);
    }
    Ok(InexactBasis { x, angles })
}

/// Random orthonormal `n x k` block orthogonal to every block in `against`.
fn orthogonal_complement_draw(against: &[&Matrix], k: usize, rng: &mut Rng) -> Result<Matrix> {
    let n = against[0].nrows();
    let mut last = None;
    for _ in 0..MAX_REDRAWS {
        let mut g = rng.gaussian_matrix(n, k);
        for _ in 0..2 {
            for b in against {
                let coeff = b.tr_mul(&g);
                g -= *b * coeff;
            }
        }
        match matrix::orthonormalize(&g) {
            Ok(mut q) => {
                // re-orthogonalize after QR to keep the blocks exactly orthogonal
                for b in against {
                    let coeff = b.tr_mul(&q);
                    q -= *b * coeff;
                }
                return matrix::orthonormalize(&q);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one draw"))
}

fn check_orthonormal(m: &Matrix, what: &'static str) -> Result<()> {
    let deviation = matrix::orthonormality_defect(m);
    if deviation > ANGLE_INPUT_TOL {
        return Err(Error::NotOrthonormal { what, deviation });
    }
    Ok(())
}

/// Principal angles between `col(U)` and `col(V)` in ascending order,
/// `min(k1, k2)` of them.
///
/// Cosines come from the singular values of `U^T V`; sines from those of the
/// part of the narrower basis orthogonal to the wider one. Each angle is read
/// from whichever is better conditioned, so angles near zero are resolved to
/// roundoff rather than to its square root.
pub fn principal_angles(u: &Matrix, v: &Matrix) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() {
        return Err(Error::dims(format!(
            "bases live in R^{} and R^{}",
            u.nrows(),
            v.nrows()
        )));
    }
    check_orthonormal(u, "first basis")?;
    check_orthonormal(v, "second basis")?;
    let (wide, narrow) = if u.ncols() >= v.ncols() { (u, v) } else { (v, u) };
    let k = narrow.ncols();
    let cross = wide.tr_mul(narrow);
    let cos = matrix::svd(&cross, None)?.s;
    let resid = narrow - wide * &cross;
    let mut sin = matrix::svd(&resid, None)?.s;
    sin.resize(k, 0.0);
    sin.reverse();
    let angles = (0..k)
        .map(|i| {
            let c = cos[i].clamp(0.0, 1.0);
            let s = sin[i].clamp(0.0, 1.0);
            if c * c < 0.5 {
                c.acos()
            } else {
                s.asin()
            }
        })
        .collect::<Vec<_>>();
    let mut angles = angles;
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// The best `n x a` orthonormal `X*` with `col(U*) ⊂ col(X*)`: the principal
/// vectors of `U*` against `X` followed by the completion of `col(X)`
/// orthogonal to the paired principal vectors. Attains
/// `||X X^T - X* X*^T|| = max_i sin(theta_i)`.
pub fn align_basis(x: &Matrix, u_star: &Matrix) -> Result<Matrix> {
    if x.nrows() != u_star.nrows() {
        return Err(Error::dims("bases live in different ambient spaces"));
    }
    check_orthonormal(x, "X")?;
    check_orthonormal(u_star, "U*")?;
    let a = x.ncols();
    let r = u_star.ncols();
    if r > a {
        return Err(Error::invalid(format!("U* has {r} columns but X only {a}")));
    }
    // X^T U* = P S Q^T with P a x a (full), Q r x r
    let cross = x.tr_mul(u_star);
    let dec = matrix::svd(&cross, None)?;
    let q = dec.v;
    let p_full = full_left_basis(&dec.u, a)?;
    let mut out = Matrix::zeros(x.nrows(), a);
    out.columns_mut(0, r).copy_from(&(u_star * q));
    if a > r {
        let rest = x * p_full.columns(r, a - r);
        out.columns_mut(r, a - r).copy_from(&rest);
    }
    Ok(out)
}

/// Completes an orthonormal `a x k` block to an `a x a` orthogonal matrix.
fn full_left_basis(u: &Matrix, a: usize) -> Result<Matrix> {
    let k = u.ncols();
    if k == a {
        return Ok(u.clone());
    }
    let mut stacked = Matrix::zeros(a, a + k);
    stacked.columns_mut(0, k).copy_from(u);
    stacked.columns_mut(k, a).copy_from(&Matrix::identity(a, a));
    let (q, kept) = matrix::orthonormalize_dropping(&stacked, 1e-8);
    if kept.len() != a || kept[..k] != (0..k).collect::<Vec<_>>()[..] {
        return Err(Error::invalid("could not complete the principal-vector basis"));
    }
    Ok(q)
}
