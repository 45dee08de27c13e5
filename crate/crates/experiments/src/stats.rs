//! Small statistical helpers: fold assignment, model selection, line fits.

use imc_core::synthetic::Rng;
use rand::seq::SliceRandom;

use crate::error::{ExpError, Result};

/// Splits `0..n` into `k` disjoint folds of sizes differing by at most one,
/// after a random shuffle. Each fold is sorted.
pub fn fold_partition(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(ExpError::config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(ExpError::config(format!(
            "{n} observations cannot fill {k} validation folds"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng.core());
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Complement of a sorted fold within `0..n`.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - fold.len());
    let mut it = fold.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Index of the smallest score, preferring the later index on ties. With
/// an ascending grid this picks the larger of equally good penalties.
/// Non-finite scores never win unless all are non-finite.
pub fn argmin_prefer_last(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            continue;
        }
        if best.is_none_or(|b| s <= scores[b]) {
            best = Some(k);
        }
    }
    best.or_else(|| (!scores.is_empty()).then(|| scores.len() - 1))
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_the_index_set() {
        let mut rng = Rng::new(3, 0);
        let folds = fold_partition(103, 5, &mut rng).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().all(|&s| s == 20 || s == 21), "{sizes:?}");
        assert!(fold_partition(4, 5, &mut rng).is_err());
        assert!(fold_partition(10, 1, &mut rng).is_err());
    }

    #[test]
    fn complement_of_fold() {
        assert_eq!(complement(6, &[0, 3, 5]), vec![1, 2, 4]);
        assert_eq!(complement(3, &[]), vec![0, 1, 2]);
    }

    #[test]
    fn ties_go_to_the_later_entry() {
        assert_eq!(argmin_prefer_last(&[3.0, 1.0, 2.0, 1.0, 5.0]), Some(3));
        assert_eq!(argmin_prefer_last(&[f64::NAN, 2.0, f64::INFINITY]), Some(1));
        assert_eq!(argmin_prefer_last(&[f64::NAN, f64::NAN]), Some(1));
        assert_eq!(argmin_prefer_last(&[]), None);
    }

    #[test]
    fn exact_line_has_unit_r2() {
        let x = [0.02, 0.04, 0.06, 0.08];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 2.0 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 0.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        // textbook example: r = 0.7746 for these points
        let fit = linear_fit(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 5.0, 4.0, 5.0]).unwrap();
        assert!((fit.slope - 0.6).abs() < 1e-12);
        assert!((fit.intercept - 2.2).abs() < 1e-12);
        assert!((fit.r2 - 0.6).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
