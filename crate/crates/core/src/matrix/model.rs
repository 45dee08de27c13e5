use super::dense::{self, Matrix};
use crate::error::{Error, Result};

/// Orthonormality tolerance for side-information bases (Frobenius).
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Column and row feature subspaces `X` (`n1 x a1`) and `Y` (`n2 x a2`),
/// both with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SideInfo {
    x: Matrix,
    y: Matrix,
}

impl SideInfo {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        Self::with_tolerance(x, y, ORTHONORMAL_TOL)
    }

    pub fn with_tolerance(x: Matrix, y: Matrix, tol: f64) -> Result<Self> {
        dense::ensure_finite(&x, "side information X")?;
        dense::ensure_finite(&y, "side information Y")?;
        if x.ncols() > x.nrows() || y.ncols() > y.nrows() {
            return Err(Error::dims(format!(
                "side information wider than tall: X {}x{}, Y {}x{}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        for (m, what) in [(&x, "side information X"), (&y, "side information Y")] {
            let deviation = dense::orthonormality_defect(m);
            if deviation > tol {
                return Err(Error::NotOrthonormal { what, deviation });
            }
        }
        Ok(Self { x, y })
    }

    /// Orthonormalizes arbitrary full-column-rank feature matrices first.
    pub fn from_features(x: &Matrix, y: &Matrix) -> Result<Self> {
        Self::new(dense::orthonormalize(x)?, dense::orthonormalize(y)?)
    }

    /// `X = I`, `Y = I`: side information that carries no restriction.
    pub fn identity(n1: usize, n2: usize) -> Self {
        Self {
            x: Matrix::identity(n1, n1),
            y: Matrix::identity(n2, n2),
        }
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn n1(&self) -> usize {
        self.x.nrows()
    }

    pub fn n2(&self) -> usize {
        self.y.nrows()
    }

    pub fn a1(&self) -> usize {
        self.x.ncols()
    }

    pub fn a2(&self) -> usize {
        self.y.ncols()
    }

    /// `X Z Y^T`.
    pub fn lift(&self, z: &Matrix) -> Matrix {
        &self.x * z * self.y.transpose()
    }
}

/// Stacked factors `(A, B)` sharing the inner dimension `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub a: Matrix,
    pub b: Matrix,
}

impl FactorPair {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if a.ncols() != b.ncols() || a.ncols() == 0 {
            return Err(Error::dims(format!(
                "factor pair inner dimensions {} and {} (need equal and >= 1)",
                a.ncols(),
                b.ncols()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn zeros(rows_a: usize, rows_b: usize, r: usize) -> Self {
        Self {
            a: Matrix::zeros(rows_a, r),
            b: Matrix::zeros(rows_b, r),
        }
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// `A B^T`.
    pub fn product(&self) -> Matrix {
        &self.a * self.b.transpose()
    }

    /// `||A^T A - B^T B||_F`.
    pub fn imbalance(&self) -> f64 {
        (self.a.tr_mul(&self.a) - self.b.tr_mul(&self.b)).norm()
    }

    pub fn norm_sq(&self) -> f64 {
        self.a.norm_squared() + self.b.norm_squared()
    }

    /// `self - step * dir`.
    pub fn step(&self, dir: &FactorPair, step: f64) -> FactorPair {
        FactorPair {
            a: &self.a - &dir.a * step,
            b: &self.b - &dir.b * step,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }

    pub fn scale_by(&self, sa: f64, sb: f64) -> FactorPair {
        FactorPair {
            a: &self.a * sa,
            b: &self.b * sb,
        }
    }

    /// `(A R, B R)`.
    pub fn rotate(&self, r: &Matrix) -> FactorPair {
        FactorPair {
            a: &self.a * r,
            b: &self.b * r,
        }
    }
}

/// A planted instance `L* = X* Z Y*^T` with its spectral summary.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub x_star: Matrix,
    pub y_star: Matrix,
    pub z: Matrix,
    pub l_star: Matrix,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub kappa: f64,
    /// Left / right singular vectors of `L*` (`n x r`), i.e. `X* U_Z`, `Y* V_Z`.
    pub u_star: Matrix,
    pub v_star: Matrix,
    /// Balanced core factors `U_Z S^{1/2}`, `V_Z S^{1/2}` in side-information
    /// coordinates.
    pub core_factors: FactorPair,
    /// Incoherence of `L*`.
    pub mu0: f64,
}

impl GroundTruth {
    /// Assembles `L*` and its spectral summary. `rank` is the number of
    /// nonzero singular values of `z`.
    pub fn new(x_star: Matrix, y_star: Matrix, z: Matrix, rank: usize) -> Result<Self> {
        if x_star.ncols() != z.nrows() || y_star.ncols() != z.ncols() {
            return Err(Error::dims(format!(
                "core {}x{} does not fit X* {}x{} and Y* {}x{}",
                z.nrows(),
                z.ncols(),
                x_star.nrows(),
                x_star.ncols(),
                y_star.nrows(),
                y_star.ncols()
            )));
        }
        for (m, what) in [(&x_star, "X*"), (&y_star, "Y*")] {
            let deviation = dense::orthonormality_defect(m);
            if deviation > ORTHONORMAL_TOL {
                return Err(Error::NotOrthonormal { what, deviation });
            }
        }
        let full = dense::svd(&z, None)?;
        if rank == 0 || rank > full.rank() {
            return Err(Error::invalid(format!("rank {rank} exceeds core dimensions")));
        }
        let s_max = full.s[0];
        if full.s[rank - 1] <= dense::RANK_TOL * s_max
            || full.s.get(rank).is_some_and(|&s| s > dense::RANK_TOL * s_max)
        {
            return Err(Error::invalid(format!(
                "core matrix does not have rank {rank} (singular values {:?})",
                full.s
            )));
        }
        let top = full.truncate(rank);
        let sigma_min = top.s[rank - 1];
        let mut ua = top.u.clone();
        let mut vb = top.v.clone();
        for (j, &s) in top.s.iter().enumerate() {
            ua.column_mut(j).scale_mut(s.sqrt());
            vb.column_mut(j).scale_mut(s.sqrt());
        }
        let u_star = &x_star * &top.u;
        let v_star = &y_star * &top.v;
        let mu0 = incoherence_of_bases(&u_star, &v_star);
        let l_star = &x_star * &z * y_star.transpose();
        Ok(Self {
            x_star,
            y_star,
            z,
            l_star,
            rank,
            sigma_max: s_max,
            sigma_min,
            kappa: s_max / sigma_min,
            u_star,
            v_star,
            core_factors: FactorPair { a: ua, b: vb },
            mu0,
        })
    }

    pub fn n1(&self) -> usize {
        self.l_star.nrows()
    }

    pub fn n2(&self) -> usize {
        self.l_star.ncols()
    }

    /// Balanced ambient factors `U* S^{1/2}`, `V* S^{1/2}` of `L*`.
    pub fn ambient_factors(&self) -> FactorPair {
        FactorPair {
            a: &self.x_star * &self.core_factors.a,
            b: &self.y_star * &self.core_factors.b,
        }
    }

    pub fn exact_side_info(&self) -> SideInfo {
        SideInfo {
            x: self.x_star.clone(),
            y: self.y_star.clone(),
        }
    }
}

/// `max(n1/r ||U||_{2,inf}^2, n2/r ||V||_{2,inf}^2)` from row leverage scores.
pub(crate) fn incoherence_of_bases(u: &Matrix, v: &Matrix) -> f64 {
    let r = u.ncols() as f64;
    let lev = |m: &Matrix| dense::row_norms_sq(m).into_iter().fold(0.0, f64::max);
    let mu_u = u.nrows() as f64 / r * lev(u);
    let mu_v = v.nrows() as f64 / r * lev(v);
    mu_u.max(mu_v)
}
