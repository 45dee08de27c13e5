use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use imc_core::matrix;
use imc_core::movielens::{
    build_side_info, evaluate_rmse, item_static_features, load_movielens, load_movielens_unchecked,
    split_train_test, test_rmse, training_singular_vectors, user_features, FeatureSpec, GENRES,
};
use imc_core::synthetic::Rng;
use imc_core::Error;

const OCCUPATIONS: [&str; 21] = [
    "administrator", "artist", "doctor", "educator", "engineer", "entertainment", "executive", "healthcare",
    "homemaker", "lawyer", "librarian", "marketing", "none", "other", "programmer", "retired", "salesman",
    "scientist", "student", "technician", "writer",
];
const AGES: [u32; 7] = [12, 20, 30, 40, 47, 52, 61];

struct Fixture {
    users: Vec<String>,
    items: Vec<String>,
    ratings: Vec<String>,
}

/// 147 users crossing every occupation with every age bin, 40 items,
/// ~1500 ratings.
fn fixture(seed: u64) -> Fixture {
    let mut rng = Rng::new(seed, 0);
    let users = (0..147)
        .map(|k| {
            let id = 1 + 2 * k; // sparse raw ids
            let age = AGES[(k / 21) % 7];
            let gender = if k % 2 == 0 { "F" } else { "M" };
            format!("{id}|{age}|{gender}|{}|0{k:04}", OCCUPATIONS[k % 21])
        })
        .collect();
    let items = (0..40)
        .map(|k| {
            let mut line = format!("{}|Film {k} (1995)|01-Jan-1995||http://example/{k}", 100 + k);
            for g in 0..GENRES {
                let on = (k + g) % 5 == 0 || (k * 7 + g) % 11 == 0;
                let _ = write!(line, "|{}", u8::from(on));
            }
            line
        })
        .collect();
    let mut ratings = Vec::new();
    for u in 0..147 {
        for i in 0..40 {
            if rng.uniform() < 0.25 {
                let value = 1 + (rng.uniform() * 5.0) as u32;
                ratings.push(format!("{}\t{}\t{value}\t{}", 1 + 2 * u, 100 + i, 880000000 + u * 40 + i));
            }
        }
    }
    Fixture { users, items, ratings }
}

fn write_fixture(dir: &Path, f: &Fixture, with_occupations: bool) {
    fs::write(dir.join("u.user"), f.users.join("\n") + "\n").unwrap();
    fs::write(dir.join("u.item"), f.items.join("\n") + "\n").unwrap();
    fs::write(dir.join("u.data"), f.ratings.join("\n") + "\n").unwrap();
    if with_occupations {
        fs::write(dir.join("u.occupation"), OCCUPATIONS.join("\n") + "\n").unwrap();
    }
}

#[test]
fn loads_and_remaps_by_ascending_id() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(1);
    write_fixture(dir.path(), &f, true);
    let table = load_movielens_unchecked(dir.path()).unwrap();
    assert_eq!(table.n_users(), 147);
    assert_eq!(table.n_items(), 40);
    assert_eq!(table.len(), f.ratings.len());
    assert!(table.user_ids.windows(2).all(|w| w[0] < w[1]));
    assert!(table.ratings.iter().all(|r| (1..=5).contains(&r.value)));
    assert_eq!(table.occupations.len(), 21);
    // the fixture is not the canonical release
    assert!(load_movielens(dir.path()).is_err());
}

#[test]
fn file_order_does_not_matter() {
    let f = fixture(2);
    let a = tempfile::tempdir().unwrap();
    write_fixture(a.path(), &f, true);
    let mut shuffled = Fixture {
        users: f.users.iter().rev().cloned().collect(),
        items: f.items.iter().rev().cloned().collect(),
        ratings: f.ratings.clone(),
    };
    shuffled.ratings.reverse();
    let b = tempfile::tempdir().unwrap();
    write_fixture(b.path(), &shuffled, true);
    let ta = load_movielens_unchecked(a.path()).unwrap();
    let tb = load_movielens_unchecked(b.path()).unwrap();
    assert_eq!(ta.user_ids, tb.user_ids);
    assert_eq!(ta.users, tb.users);
    assert_eq!(ta.genres, tb.genres);
    let mut ra: Vec<_> = ta.ratings.iter().map(|r| (r.user, r.item, r.value)).collect();
    let mut rb: Vec<_> = tb.ratings.iter().map(|r| (r.user, r.item, r.value)).collect();
    ra.sort_unstable();
    rb.sort_unstable();
    assert_eq!(ra, rb);
    let spec = FeatureSpec::default();
    assert_eq!(user_features(&ta, &spec).0, user_features(&tb, &spec).0);
}

#[test]
fn malformed_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut f = fixture(3);
    f.ratings[5] = "7\t101".to_string();
    write_fixture(dir.path(), &f, false);
    let err = load_movielens_unchecked(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 6, .. }), "{err}");
    assert!(err.to_string().contains("u.data"));

    let mut f = fixture(3);
    f.ratings[0] = "1\t100\t6\t0".to_string();
    write_fixture(dir.path(), &f, false);
    assert!(load_movielens_unchecked(dir.path()).unwrap_err().to_string().contains("outside 1..5"));

    fs::remove_file(dir.path().join("u.item")).unwrap();
    let err = load_movielens_unchecked(dir.path()).unwrap_err();
    assert!(err.to_string().contains("u.item"));
}

#[test]
fn user_features_follow_the_layout() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &fixture(4), true);
    let table = load_movielens_unchecked(dir.path()).unwrap();
    let (m, names) = user_features(&table, &FeatureSpec::default());
    assert_eq!(m.ncols(), 29);
    assert_eq!(names.len(), 29);
    assert!(!names.iter().any(|n| n == "occupation:none"));
    for row in 0..m.nrows() {
        assert_eq!(m[(row, 0)], 1.0);
        let ages: f64 = (2..9).map(|c| m[(row, c)]).sum();
        assert_eq!(ages, 1.0);
        let occ: f64 = (9..29).map(|c| m[(row, c)]).sum();
        let expected = if table.users[row].occupation == "none" { 0.0 } else { 1.0 };
        assert_eq!(occ, expected);
    }
    assert_eq!(item_static_features(&table).ncols(), 1 + GENRES);
}

#[test]
fn side_info_is_orthonormal_with_dependent_columns_dropped() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &fixture(5), true);
    let table = load_movielens_unchecked(dir.path()).unwrap();
    let mut rng = Rng::new(5, 0);
    let (train, _) = split_train_test(table.len(), 700, &mut rng).unwrap();
    let spec = FeatureSpec {
        svd_components: 5,
        ..FeatureSpec::default()
    };
    let feats = build_side_info(&table, &train, &spec, 0).unwrap();
    let si = &feats.side_info;
    assert!(matrix::orthonormality_defect(si.x()) < 1e-10);
    assert!(matrix::orthonormality_defect(si.y()) < 1e-10);
    // the seven age indicators sum to the intercept, so one of them goes
    assert_eq!(feats.dropped_user, vec!["age[56,inf)".to_string()]);
    assert_eq!(si.a1(), 28);
    assert_eq!(si.a1() + feats.dropped_user.len(), 29);
    assert_eq!(si.a2() + feats.dropped_item.len(), 1 + GENRES + 5);
    let sv = training_singular_vectors(&table, &train, 5, 0).unwrap();
    assert!(matrix::orthonormality_defect(&sv) < 1e-8);
}

#[test]
fn split_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &fixture(6), true);
    let table = load_movielens_unchecked(dir.path()).unwrap();
    let a = split_train_test(table.len(), 50, &mut Rng::new(9, 0)).unwrap();
    let b = split_train_test(table.len(), 50, &mut Rng::new(9, 0)).unwrap();
    assert_eq!(a, b);
    let (users, items) = table.unobserved_counts(&a.0);
    let seen_users: std::collections::BTreeSet<_> = a.0.iter().map(|&k| table.ratings[k].user).collect();
    assert_eq!(users, table.n_users() - seen_users.len());
    assert!(items < table.n_items());
    assert!((table.empirical_p(50) - 50.0 / (147.0 * 40.0)).abs() < 1e-15);
}

#[test]
fn rmse_of_exact_and_constant_predictions() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), &fixture(7), true);
    let table = load_movielens_unchecked(dir.path()).unwrap();
    let (train, test) = split_train_test(table.len(), 100, &mut Rng::new(1, 0)).unwrap();
    let all: Vec<usize> = train.iter().chain(&test).copied().collect();
    let dense = table.observations(&all, 1.0).unwrap().to_dense();
    assert_eq!(test_rmse(&dense, &table, &test, false).unwrap(), 0.0);
    assert!((evaluate_rmse(&[3.0, 3.0], &[2.0, 4.0], false).unwrap() - 1.0).abs() < 1e-15);
}
