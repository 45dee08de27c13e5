use imc_core::synthetic::Rng;
use imc_experiments::stats::{argmin_prefer_last, complement, fold_partition, linear_fit};
use imc_experiments::table::{metric, Cell};
use imc_experiments::{Experiment, Method, ResultTable};
use proptest::prelude::*;

const METHODS: [Method; 3] = [Method::Imc, Method::Mc, Method::Interp];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_the_index_set(seed in 0u64..1000, k in 2usize..8, extra in 0usize..60) {
        let n = k + extra;
        let folds = fold_partition(n, k, &mut Rng::new(seed, 0)).unwrap();
        prop_assert_eq!(folds.len(), k);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for f in &folds {
            let rest = complement(n, f);
            prop_assert_eq!(rest.len() + f.len(), n);
            prop_assert!(rest.iter().all(|i| f.binary_search(i).is_err()));
        }
    }

    #[test]
    fn argmin_is_a_minimum_and_the_last_one(scores in prop::collection::vec(prop_oneof![0.0f64..4.0, Just(1.0), Just(f64::NAN)], 1..12)) {
        let k = argmin_prefer_last(&scores).unwrap();
        let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
        if finite.is_empty() {
            prop_assert_eq!(k, scores.len() - 1);
        } else {
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(scores[k], min);
            prop_assert!(scores[k + 1..].iter().all(|s| !(*s <= min)));
        }
    }

    #[test]
    fn exact_lines_are_recovered(slope in -5.0f64..5.0, intercept in -5.0f64..5.0, n in 2usize..20) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| intercept + slope * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - intercept).abs() < 1e-9);
        prop_assert!(slope.abs() < 1e-6 || (fit.r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn result_tables_round_trip_through_csv(
        vals in prop::collection::vec((0usize..3, 1e-6f64..1.0, -1e8f64..1e8, any::<bool>()), 1..30)
    ) {
        let mut t = ResultTable::new();
        for (trial, (m, p, v, failed)) in vals.into_iter().enumerate() {
            let cell = Cell::p(p).with_delta(p / 2.0);
            if failed {
                t.push_failure(Experiment::InexactError, trial, cell, METHODS[m], "diverged, step too large");
            } else {
                t.push(Experiment::InexactError, Some(trial), cell, METHODS[m], metric::REL_ERROR, v);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        t.write_csv(&path).unwrap();
        prop_assert_eq!(ResultTable::read_csv(&path).unwrap(), t);
    }
}
