//! Dense kernels: SVD with a deterministic sign convention, orthonormalization
//! and the norms the rest of the crate is stated in.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix. Entries are stored column-major by nalgebra; all
/// constructors in this crate take row-major input.
pub type Matrix = DMatrix<f64>;

/// Singular values at or below `RANK_TOL * s_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Iteration cap handed to the bidiagonal QR sweep.
const SVD_MAX_ITERS: usize = 10_000;
/// Convergence threshold of the QR sweep. A bare machine epsilon ends the
/// sweep early on clustered small singular values, so match the library default.
const SVD_EPS: f64 = 5.0 * f64::EPSILON;

pub fn from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!("matrix must be non-empty, got {rows}x{cols}")));
    }
    if entries.len() != rows * cols {
        return Err(Error::dims(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = Matrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m, "matrix entries")?;
    Ok(m)
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Compact SVD `U diag(S) V^T` with `S` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(s);
        }
        us * self.v.transpose()
    }

    /// Number of singular values above `tol * s_max`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        let top = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&s| s > tol * top).count()
    }

    pub fn truncate(mut self, k: usize) -> Self {
        let k = k.min(self.s.len());
        self.s.truncate(k);
        self.u = self.u.columns(0, k).into_owned();
        self.v = self.v.columns(0, k).into_owned();
        self
    }
}

/// Top-`k` (or full, when `k` is `None`) singular value decomposition.
///
/// Each left singular vector is oriented so that its largest-magnitude entry
/// is nonnegative; the matching right vector is flipped with it.
pub fn svd(m: &Matrix, k: Option<usize>) -> Result<Svd> {
    ensure_finite(m, "SVD input")?;
    let (rows, cols) = m.shape();
    let full = rows.min(cols);
    let k = k.unwrap_or(full);
    if k > full {
        return Err(Error::invalid(format!(
            "requested {k} singular triplets of a {rows}x{cols} matrix"
        )));
    }
    let dec = nalgebra::SVD::try_new(m.clone(), true, true, SVD_EPS, SVD_MAX_ITERS)
        .ok_or(Error::SvdFailed { rows, cols })?;
    let (u, v_t) = match (dec.u, dec.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SvdFailed { rows, cols }),
    };
    let values = dec.singular_values;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);

    let mut out_u = Matrix::zeros(rows, k);
    let mut out_v = Matrix::zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).into_owned();
        let mut vcol = v_t.row(src).transpose();
        if !ucol.iter().all(|x| x.is_finite()) || !vcol.iter().all(|x| x.is_finite()) {
            return Err(Error::SvdFailed { rows, cols });
        }
        let pivot = ucol.iamax();
        if ucol[pivot] < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        out_u.set_column(dst, &ucol);
        out_v.set_column(dst, &vcol);
        s.push(values[src].max(0.0));
    }
    Ok(Svd { u: out_u, s, v: out_v })
}

/// Orthonormal basis of the column span of a full-column-rank matrix.
pub fn orthonormalize(m: &Matrix) -> Result<Matrix> {
    ensure_finite(m, "orthonormalize input")?;
    let cols = m.ncols();
    if cols > m.nrows() {
        return Err(Error::RankDeficient {
            deficient: cols - m.nrows(),
            cols,
        });
    }
    let sv = m.singular_values();
    let top = sv.max();
    let deficient = sv.iter().filter(|&&s| !(s > RANK_TOL * top)).count();
    if deficient > 0 {
        return Err(Error::RankDeficient { deficient, cols });
    }
    Ok(thin_q(m))
}

/// Orthonormalizes columns left to right, dropping any column whose component
/// orthogonal to the kept ones is below `tol` times its own norm. Returns the
/// basis and the indices of the kept input columns.
pub fn orthonormalize_dropping(m: &Matrix, tol: f64) -> (Matrix, Vec<usize>) {
    let n = m.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..m.ncols() {
        let col = m.column(j).into_owned();
        let norm0 = col.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = col;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let nw = w.norm();
        if nw > tol * norm0 {
            basis.push(w / nw);
            kept.push(j);
        }
    }
    let mut out = Matrix::zeros(n, basis.len());
    for (j, q) in basis.iter().enumerate() {
        out.set_column(j, q);
    }
    (out, kept)
}

/// Thin Q factor of a Householder QR.
pub(crate) fn thin_q(m: &Matrix) -> Matrix {
    m.clone().qr().q()
}

/// Largest row Euclidean norm.
pub fn two_inf_norm(m: &Matrix) -> f64 {
    row_norms_sq(m).into_iter().fold(0.0, f64::max).sqrt()
}

pub fn row_norms_sq(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for col in m.column_iter() {
        for (acc, v) in out.iter_mut().zip(col.iter()) {
            *acc += v * v;
        }
    }
    out
}

pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    ensure_finite(m, "spectral norm input")?;
    Ok(m.singular_values().max())
}

/// `||M^T M - I||_F`.
pub fn orthonormality_defect(m: &Matrix) -> f64 {
    let g = m.tr_mul(m);
    (g - Matrix::identity(m.ncols(), m.ncols())).norm()
}

/// `||A B^T||_F^2 = tr((A^T A)(B^T B))`, never forming `A B^T`.
pub fn factored_frob_sq(a: &Matrix, b: &Matrix) -> f64 {
    let ga = a.tr_mul(a);
    let gb = b.tr_mul(b);
    ga.component_mul(&gb).sum()
}

/// `||A B^T||_F` evaluated from thin QR factors, so it stays accurate when
/// `A B^T` is the small difference of two larger products.
pub fn factored_frob(a: &Matrix, b: &Matrix) -> f64 {
    let ra = a.clone().qr().r();
    let rb = b.clone().qr().r();
    (ra * rb.transpose()).norm()
}

/// Spectral norm of `U U^T - V V^T` for orthonormal `U`, `V`, read off as the
/// larger of `||(I - U U^T) V||` and `||(I - V V^T) U||` so no ambient-size
/// square matrix is formed and only singular values are needed.
pub fn projector_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.nrows() != v.nrows() {
        return Err(Error::dims(format!(
            "bases live in R^{} and R^{}",
            u.nrows(),
            v.nrows()
        )));
    }
    let uv = u.tr_mul(v);
    let v_off = v - u * &uv;
    let u_off = u - v * uv.transpose();
    Ok(spectral_norm(&v_off)?.max(spectral_norm(&u_off)?))
}

pub fn frob_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.component_mul(b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_identity() {
        let dec = svd(&Matrix::identity(3, 3), Some(3)).unwrap();
        assert_eq!(dec.s, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn svd_resolves_clustered_small_values() {
        // orthonormal columns scaled by known values, two of them nearly equal
        let q = crate::matrix::orthonormalize(&Matrix::from_fn(30, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0)).unwrap();
        let want = [0.3359206816017651, 0.03373403902250763, 0.03222080401141739];
        let m = &q * Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&want));
        let got = svd(&m, None).unwrap().s;
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14, "{g} vs {w}");
        }
    }

    #[test]
    fn svd_diagonal_leading_vectors() {
        let m = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let dec = svd(&m, Some(2)).unwrap();
        assert!((dec.s[0] - 3.0).abs() < 1e-14 && (dec.s[1] - 2.0).abs() < 1e-14);
        for j in 0..2 {
            assert!((dec.u[(j, j)] - 1.0).abs() < 1e-14);
            assert!((dec.v[(j, j)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_sign_convention() {
        let m = from_rows(3, 2, &[-4.0, 0.0, -1.0, 1.0, 0.5, -2.0]).unwrap();
        let dec = svd(&m, None).unwrap();
        for j in 0..dec.rank() {
            let col = dec.u.column(j);
            assert!(col[col.iamax()] >= 0.0);
        }
        assert!((dec.reconstruct() - m).norm() < 1e-13);
    }

    #[test]
    fn svd_rejects_nonfinite_and_oversized_k() {
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m, None), Err(Error::NonFinite(_))));
        assert!(svd(&Matrix::identity(2, 3), Some(3)).is_err());
    }

    #[test]
    fn wide_svd() {
        let m = from_rows(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let dec = svd(&m, None).unwrap();
        assert_eq!(dec.u.shape(), (2, 2));
        assert_eq!(dec.v.shape(), (3, 2));
        assert!((dec.reconstruct() - m).norm() < 1e-12);
    }

    #[test]
    fn orthonormalize_axis_aligned() {
        let m = from_rows(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let q = orthonormalize(&m).unwrap();
        assert!((q[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((q[(1, 1)].abs() - 1.0).abs() < 1e-15);
        assert!(q[(2, 0)].abs() < 1e-15 && q[(2, 1)].abs() < 1e-15);
    }

    #[test]
    fn orthonormalize_reports_deficient_count() {
        let m = from_rows(4, 3, &[1.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0, 3.0, 6.0, 3.0]).unwrap();
        match orthonormalize(&m) {
            Err(Error::RankDeficient { deficient, cols }) => {
                assert_eq!((deficient, cols), (2, 3));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn dropping_variant_keeps_independent_columns() {
        let m = from_rows(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let (q, kept) = orthonormalize_dropping(&m, 1e-10);
        assert_eq!(kept, vec![0, 2]);
        assert!(orthonormality_defect(&q) < 1e-14);
    }

    #[test]
    fn two_inf_norm_examples() {
        assert_eq!(two_inf_norm(&Matrix::identity(3, 3)), 1.0);
        let m = from_rows(2, 2, &[3.0, 4.0, 0.0, 1.0]).unwrap();
        assert_eq!(two_inf_norm(&m), 5.0);
    }

    #[test]
    fn from_rows_validates() {
        assert!(from_rows(0, 2, &[]).is_err());
        assert!(from_rows(2, 2, &[1.0, 2.0, 3.0]).is_err());
        assert!(from_rows(1, 2, &[1.0, f64::INFINITY]).is_err());
        let m = from_rows(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m[(1, 0)], 4.0);
    }

    #[test]
    fn factored_norms_agree_with_dense() {
        let a = from_rows(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]).unwrap();
        let b = from_rows(4, 2, &[0.1, 1.0, 2.0, -1.0, 0.0, 0.3, 1.0, 1.0]).unwrap();
        let dense = (&a * b.transpose()).norm();
        assert!((factored_frob_sq(&a, &b) - dense * dense).abs() < 1e-12);
        assert!((factored_frob(&a, &b) - dense).abs() < 1e-12);
    }
}
