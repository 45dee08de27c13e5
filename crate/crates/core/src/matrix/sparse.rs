//! Observed entries `P_Omega(M)` stored as triplets with a hash index.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dense::{self, Matrix, Svd};
use crate::error::{Error, Result};

/// Problems with at most this many cells are decomposed densely.
const DENSE_SVD_CELLS: usize = 300 * 300;
const SUBSPACE_OVERSAMPLE: usize = 10;
const SUBSPACE_MAX_ITERS: usize = 2000;
const SUBSPACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

/// The sampled index set together with the observed values on it.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    n1: usize,
    n2: usize,
    p: f64,
    entries: Vec<Entry>,
    index: HashMap<(usize, usize), usize>,
}

impl ObservationSet {
    pub fn new(n1: usize, n2: usize, p: f64, entries: Vec<Entry>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid(format!("observation grid must be non-empty, got {n1}x{n2}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("sampling probability must lie in (0, 1], got {p}")));
        }
        if entries.len() > n1 * n2 {
            return Err(Error::invalid("more observations than matrix cells"));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (k, e) in entries.iter().enumerate() {
            if e.i >= n1 || e.j >= n2 {
                return Err(Error::invalid(format!(
                    "entry ({}, {}) outside {n1}x{n2} grid",
                    e.i, e.j
                )));
            }
            if !e.v.is_finite() {
                return Err(Error::NonFinite("observed value"));
            }
            if index.insert((e.i, e.j), k).is_some() {
                return Err(Error::invalid(format!("duplicate entry ({}, {})", e.i, e.j)));
            }
        }
        Ok(Self {
            n1,
            n2,
            p,
            entries,
            index,
        })
    }

    /// Every cell of `m`, with `p = 1`.
    pub fn full(m: &Matrix) -> Result<Self> {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Entry { i, j, v: m[(i, j)] })
            .collect();
        Self::new(m.nrows(), m.ncols(), 1.0, entries)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.v).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.index.get(&(i, j)).map(|&k| self.entries[k].v)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.index.contains_key(&(i, j))
    }

    /// Same index set, new values (aligned with `entries()`).
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.entries.len() {
            return Err(Error::dims(format!(
                "{} values for {} observed entries",
                values.len(),
                self.entries.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observed value"));
        }
        let mut out = self.clone();
        for (e, &v) in out.entries.iter_mut().zip(values) {
            e.v = v;
        }
        Ok(out)
    }

    /// Restriction to the entries at positions `keep`, declared with sampling
    /// probability `p`.
    pub fn subset(&self, keep: &[usize], p: f64) -> Result<Self> {
        let entries = keep.iter().map(|&k| self.entries[k]).collect();
        Self::new(self.n1, self.n2, p, entries)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.n1, self.n2, p, self.entries.clone())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n1, self.n2);
        for e in &self.entries {
            m[(e.i, e.j)] = e.v;
        }
        m
    }

    pub fn frob_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.v * e.v).sum()
    }

    /// `(P Q^T)_{ij} - M_{ij}` for every observed `(i, j)`. `pt` and `qt` are
    /// the transposed factors (`r x n1`, `r x n2`) so each lookup is a
    /// contiguous column.
    pub fn residual_t(&self, pt: &Matrix, qt: &Matrix) -> Vec<f64> {
        let r = pt.nrows();
        let ps = pt.as_slice();
        let qs = qt.as_slice();
        self.entries
            .iter()
            .map(|e| {
                let a = &ps[e.i * r..(e.i + 1) * r];
                let b = &qs[e.j * r..(e.j + 1) * r];
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() - e.v
            })
            .collect()
    }

    /// `S Q` where `S` is the sparse matrix carrying `vals` on the index set.
    /// `qt` is `Q^T` (`k x n2`); the result is `n1 x k`.
    pub fn mul_t(&self, vals: &[f64], qt: &Matrix) -> Matrix {
        let k = qt.nrows();
        let mut out_t = Matrix::zeros(k, self.n1);
        {
            let qs = qt.as_slice();
            let os = out_t.as_mut_slice();
            for (e, &v) in self.entries.iter().zip(vals) {
                let src = &qs[e.j * k..(e.j + 1) * k];
                let dst = &mut os[e.i * k..(e.i + 1) * k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        out_t.transpose()
    }

    /// `S^T P` with `pt = P^T` (`k x n1`); the result is `n2 x k`.
    pub fn tr_mul_t(&self, vals: &[f64], pt: &Matrix) -> Matrix {
        let k = pt.nrows();
        let mut out_t = Matrix::zeros(k, self.n2);
        {
            let ps = pt.as_slice();
            let os = out_t.as_mut_slice();
            for (e, &v) in self.entries.iter().zip(vals) {
                let src = &ps[e.i * k..(e.i + 1) * k];
                let dst = &mut os[e.j * k..(e.j + 1) * k];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        out_t.transpose()
    }

    /// `S Q` for `S` carrying `vals`.
    pub fn mul(&self, vals: &[f64], q: &Matrix) -> Matrix {
        self.mul_t(vals, &q.transpose())
    }

    /// `S^T P` for `S` carrying `vals`.
    pub fn tr_mul(&self, vals: &[f64], p: &Matrix) -> Matrix {
        self.tr_mul_t(vals, &p.transpose())
    }

    /// Top-`k` SVD of `scale * P_Omega(M)`.
    ///
    /// Small grids are densified; larger ones use block subspace iteration
    /// with Rayleigh-Ritz extraction from a fixed-seed start, so the result
    /// is deterministic for a given `seed`.
    pub fn top_svd(&self, scale: f64, k: usize, seed: u64) -> Result<Svd> {
        let full = self.n1.min(self.n2);
        if k == 0 || k > full {
            return Err(Error::invalid(format!(
                "requested {k} singular triplets of a {}x{} matrix",
                self.n1, self.n2
            )));
        }
        let vals: Vec<f64> = self.entries.iter().map(|e| scale * e.v).collect();
        if self.n1 * self.n2 <= DENSE_SVD_CELLS || k + SUBSPACE_OVERSAMPLE >= full {
            let mut d = self.to_dense();
            d *= scale;
            return dense::svd(&d, Some(k));
        }
        self.subspace_svd(&vals, k, seed)
    }

    fn subspace_svd(&self, vals: &[f64], k: usize, seed: u64) -> Result<Svd> {
        let block = k + SUBSPACE_OVERSAMPLE;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = Matrix::from_fn(self.n2, block, |_, _| StandardNormal.sample(&mut rng));
        let mut v = dense::thin_q(&start);
        let mut prev: Vec<f64> = vec![f64::INFINITY; k];
        let mut best = None;
        for _ in 0..SUBSPACE_MAX_ITERS {
            let u = dense::thin_q(&self.mul(vals, &v));
            // A^T U = P S W^T  =>  A ~ U W S P^T
            let c = self.tr_mul(vals, &u);
            let ritz = dense::svd(&c, None)?;
            let s: Vec<f64> = ritz.s.iter().take(k).copied().collect();
            let top = s[0].max(f64::MIN_POSITIVE);
            let change = s
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / top;
            prev = s;
            v = ritz.u.clone();
            let done = change < SUBSPACE_TOL;
            best = Some((u, ritz));
            if done {
                break;
            }
        }
        let (u, ritz) = best.expect("at least one subspace iteration runs");
        let left = &u * &ritz.v;
        let mut out_u = left.columns(0, k).into_owned();
        let mut out_v = ritz.u.columns(0, k).into_owned();
        for j in 0..k {
            let pivot = out_u.column(j).iamax();
            if out_u[(pivot, j)] < 0.0 {
                out_u.column_mut(j).neg_mut();
                out_v.column_mut(j).neg_mut();
            }
        }
        Ok(Svd {
            u: out_u,
            s: ritz.s[..k].to_vec(),
            v: out_v,
        })
    }
}
