//! MovieLens 100K: loading, demographic and genre features, random
//! train/test splits and RMSE.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::{self, Entry, Matrix, ObservationSet, SideInfo};
use crate::synthetic::Rng;

pub const CANONICAL_RATINGS: usize = 100_000;
pub const CANONICAL_USERS: usize = 943;
pub const CANONICAL_ITEMS: usize = 1682;
pub const GENRES: usize = 19;

/// Feature columns whose residual after orthogonalizing against the earlier
/// ones is below this fraction of their norm are dropped.
const DEPENDENT_COLUMN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rating {
    /// Dense user index.
    pub user: usize,
    /// Dense item index.
    pub item: usize,
    pub value: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub age: u32,
    pub male: bool,
    pub occupation: String,
}

/// Ratings with users and items remapped to dense indices in ascending order
/// of their raw ids.
#[derive(Debug, Clone)]
pub struct RatingsTable {
    pub ratings: Vec<Rating>,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    pub users: Vec<User>,
    pub genres: Vec<[bool; GENRES]>,
    /// Occupation vocabulary, sorted.
    pub occupations: Vec<String>,
}

impl RatingsTable {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.genres.len()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn check_canonical(&self) -> Result<()> {
        let got = (self.len(), self.n_users(), self.n_items());
        let want = (CANONICAL_RATINGS, CANONICAL_USERS, CANONICAL_ITEMS);
        if got != want {
            return Err(Error::invalid(format!(
                "u.data: expected {} ratings by {} users on {} items, found {} / {} / {}",
                want.0, want.1, want.2, got.0, got.1, got.2
            )));
        }
        Ok(())
    }

    /// Observation set over the given rating indices with probability `p`.
    pub fn observations(&self, idx: &[usize], p: f64) -> Result<ObservationSet> {
        let entries = idx
            .iter()
            .map(|&k| {
                let r = self.ratings[k];
                Entry {
                    i: r.user,
                    j: r.item,
                    v: f64::from(r.value),
                }
            })
            .collect();
        ObservationSet::new(self.n_users(), self.n_items(), p, entries)
    }

    /// `m / (n_users n_items)`.
    pub fn empirical_p(&self, m: usize) -> f64 {
        m as f64 / (self.n_users() * self.n_items()) as f64
    }

    /// Users and items with no rating among `train`.
    pub fn unobserved_counts(&self, train: &[usize]) -> (usize, usize) {
        let mut seen_u = vec![false; self.n_users()];
        let mut seen_i = vec![false; self.n_items()];
        for &k in train {
            seen_u[self.ratings[k].user] = true;
            seen_i[self.ratings[k].item] = true;
        }
        let missing = |v: &[bool]| v.iter().filter(|&&s| !s).count();
        (missing(&seen_u), missing(&seen_i))
    }
}

/// Loads `u.data`, `u.user`, `u.item` (and `u.occupation` if present) and
/// requires the canonical 100K counts.
pub fn load_movielens(dir: &Path) -> Result<RatingsTable> {
    let table = load_movielens_unchecked(dir)?;
    table.check_canonical()?;
    Ok(table)
}

/// As [`load_movielens`] without the count check, for subsets and fixtures.
pub fn load_movielens_unchecked(dir: &Path) -> Result<RatingsTable> {
    let users_raw = parse_users(&dir.join("u.user"))?;
    let items_raw = parse_items(&dir.join("u.item"))?;
    let data_path = dir.join("u.data");
    let data = read_text(&data_path)?;

    let mut vocab: BTreeSet<String> = users_raw.values().map(|u| u.occupation.clone()).collect();
    let occ_path = dir.join("u.occupation");
    if occ_path.exists() {
        for line in read_text(&occ_path)?.lines() {
            let name = line.trim();
            if !name.is_empty() {
                vocab.insert(name.to_string());
            }
        }
    }

    let user_ids: Vec<u64> = users_raw.keys().copied().collect();
    let item_ids: Vec<u64> = items_raw.keys().copied().collect();
    let user_pos: HashMap<u64, usize> = user_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let item_pos: HashMap<u64, usize> = item_ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    let name = data_path.display().to_string();
    let mut ratings = Vec::new();
    let mut seen = BTreeSet::new();
    for (ln, line) in data.lines().enumerate() {
        let ln = ln + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(&name, ln, format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let uid: u64 = parse_field(&name, ln, fields[0], "user id")?;
        let iid: u64 = parse_field(&name, ln, fields[1], "item id")?;
        let value: u8 = parse_field(&name, ln, fields[2], "rating")?;
        let _: u64 = parse_field(&name, ln, fields[3], "timestamp")?;
        if !(1..=5).contains(&value) {
            return Err(Error::parse(&name, ln, format!("rating {value} outside 1..5")));
        }
        let user = *user_pos
            .get(&uid)
            .ok_or_else(|| Error::parse(&name, ln, format!("user {uid} missing from u.user")))?;
        let item = *item_pos
            .get(&iid)
            .ok_or_else(|| Error::parse(&name, ln, format!("item {iid} missing from u.item")))?;
        if !seen.insert((user, item)) {
            return Err(Error::parse(&name, ln, format!("second rating of item {iid} by user {uid}")));
        }
        ratings.push(Rating { user, item, value });
    }
    if ratings.is_empty() {
        return Err(Error::parse(&name, 0, "no ratings"));
    }
    Ok(RatingsTable {
        ratings,
        user_ids,
        item_ids,
        users: users_raw.into_values().collect(),
        genres: items_raw.into_values().collect(),
        occupations: vocab.into_iter().collect(),
    })
}

/// The files are Latin-1 in places; invalid UTF-8 is replaced rather than
/// rejected since only numeric fields and ASCII labels are used.
fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn parse_field<T: std::str::FromStr>(file: &str, line: usize, s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(file, line, format!("bad {what} {s:?}")))
}

fn parse_users(path: &Path) -> Result<BTreeMap<u64, User>> {
    let name = path.display().to_string();
    let mut out = BTreeMap::new();
    for (ln, line) in read_text(path)?.lines().enumerate() {
        let ln = ln + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('|').collect();
        if f.len() != 5 {
            return Err(Error::parse(&name, ln, format!("expected 5 '|'-separated fields, got {}", f.len())));
        }
        let id: u64 = parse_field(&name, ln, f[0], "user id")?;
        let age: u32 = parse_field(&name, ln, f[1], "age")?;
        let male = match f[2].trim() {
            "M" => true,
            "F" => false,
            other => return Err(Error::parse(&name, ln, format!("gender {other:?} is neither M nor F"))),
        };
        let user = User {
            age,
            male,
            occupation: f[3].trim().to_string(),
        };
        if out.insert(id, user).is_some() {
            return Err(Error::parse(&name, ln, format!("duplicate user id {id}")));
        }
    }
    if out.is_empty() {
        return Err(Error::parse(&name, 0, "no users"));
    }
    Ok(out)
}

fn parse_items(path: &Path) -> Result<BTreeMap<u64, [bool; GENRES]>> {
    let name = path.display().to_string();
    let mut out = BTreeMap::new();
    for (ln, line) in read_text(path)?.lines().enumerate() {
        let ln = ln + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('|').collect();
        if f.len() != 5 + GENRES {
            return Err(Error::parse(
                &name,
                ln,
                format!("expected {} '|'-separated fields, got {}", 5 + GENRES, f.len()),
            ));
        }
        let id: u64 = parse_field(&name, ln, f[0], "item id")?;
        let mut flags = [false; GENRES];
        for (g, raw) in f[5..].iter().enumerate() {
            flags[g] = match raw.trim() {
                "1" => true,
                "0" => false,
                other => return Err(Error::parse(&name, ln, format!("genre flag {other:?}"))),
            };
        }
        if out.insert(id, flags).is_some() {
            return Err(Error::parse(&name, ln, format!("duplicate item id {id}")));
        }
    }
    if out.is_empty() {
        return Err(Error::parse(&name, 0, "no items"));
    }
    Ok(out)
}

/// How raw attributes become feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    /// Interior age cut points; `k` cuts give `k + 1` bins.
    pub age_cuts: Vec<u32>,
    /// Occupation folded into the intercept.
    pub reference_occupation: String,
    /// Number of right singular vectors of the training matrix appended to
    /// the item features.
    pub svd_components: usize,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            age_cuts: vec![18, 25, 35, 45, 50, 56],
            reference_occupation: "none".to_string(),
            svd_components: 10,
        }
    }
}

impl FeatureSpec {
    fn age_bin(&self, age: u32) -> usize {
        self.age_cuts.iter().take_while(|&&c| age >= c).count()
    }
}

/// Intercept, gender, one-hot age bins, one-hot occupations minus the
/// reference. Column names come back alongside.
pub fn user_features(table: &RatingsTable, spec: &FeatureSpec) -> (Matrix, Vec<String>) {
    let occ: Vec<&String> = table
        .occupations
        .iter()
        .filter(|o| **o != spec.reference_occupation)
        .collect();
    let bins = spec.age_cuts.len() + 1;
    let cols = 2 + bins + occ.len();
    let mut m = Matrix::zeros(table.n_users(), cols);
    for (k, u) in table.users.iter().enumerate() {
        m[(k, 0)] = 1.0;
        m[(k, 1)] = if u.male { 1.0 } else { 0.0 };
        m[(k, 2 + spec.age_bin(u.age))] = 1.0;
        if let Some(o) = occ.iter().position(|o| **o == u.occupation) {
            m[(k, 2 + bins + o)] = 1.0;
        }
    }
    let mut names = vec!["intercept".to_string(), "male".to_string()];
    let mut lo = 0;
    for &c in &spec.age_cuts {
        names.push(format!("age[{lo},{c})"));
        lo = c;
    }
    names.push(format!("age[{lo},inf)"));
    names.extend(occ.iter().map(|o| format!("occupation:{o}")));
    (m, names)
}

/// Intercept and the genre flags.
pub fn item_static_features(table: &RatingsTable) -> Matrix {
    let mut m = Matrix::zeros(table.n_items(), 1 + GENRES);
    for (k, flags) in table.genres.iter().enumerate() {
        m[(k, 0)] = 1.0;
        for (g, &on) in flags.iter().enumerate() {
            if on {
                m[(k, 1 + g)] = 1.0;
            }
        }
    }
    m
}

/// Top right singular vectors of the training ratings with unobserved
/// entries set to zero.
pub fn training_singular_vectors(table: &RatingsTable, train: &[usize], k: usize, seed: u64) -> Result<Matrix> {
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let obs = table.observations(train, table.empirical_p(train.len()).min(1.0))?;
    Ok(obs.top_svd(1.0, k, seed)?.v)
}

/// Orthonormalized side information with the record of what was dropped.
#[derive(Debug, Clone)]
pub struct MovieLensFeatures {
    pub side_info: SideInfo,
    pub user_columns: Vec<String>,
    pub item_columns: Vec<String>,
    /// Assembled columns removed as linearly dependent on earlier ones.
    pub dropped_user: Vec<String>,
    pub dropped_item: Vec<String>,
}

/// User and item feature matrices for one training split, orthonormalized
/// with dependent columns dropped.
pub fn build_side_info(table: &RatingsTable, train: &[usize], spec: &FeatureSpec, seed: u64) -> Result<MovieLensFeatures> {
    let (raw_u, names_u) = user_features(table, spec);
    let static_i = item_static_features(table);
    let mut names_i = vec!["intercept".to_string()];
    names_i.extend((0..GENRES).map(|g| format!("genre{g}")));
    let raw_i = if spec.svd_components > 0 {
        let sv = training_singular_vectors(table, train, spec.svd_components, seed)?;
        let mut m = Matrix::zeros(table.n_items(), static_i.ncols() + sv.ncols());
        m.columns_mut(0, static_i.ncols()).copy_from(&static_i);
        m.columns_mut(static_i.ncols(), sv.ncols()).copy_from(&sv);
        names_i.extend((0..sv.ncols()).map(|k| format!("train_sv{k}")));
        m
    } else {
        static_i
    };
    let (x, kept_u) = matrix::orthonormalize_dropping(&raw_u, DEPENDENT_COLUMN_TOL);
    let (y, kept_i) = matrix::orthonormalize_dropping(&raw_i, DEPENDENT_COLUMN_TOL);
    let split = |names: Vec<String>, kept: &[usize]| {
        let mut on = Vec::new();
        let mut off = Vec::new();
        for (k, n) in names.into_iter().enumerate() {
            if kept.contains(&k) {
                on.push(n);
            } else {
                off.push(n);
            }
        }
        (on, off)
    };
    let (user_columns, dropped_user) = split(names_u, &kept_u);
    let (item_columns, dropped_item) = split(names_i, &kept_i);
    if !dropped_user.is_empty() {
        log::warn!("dropped dependent user features: {}", dropped_user.join(", "));
    }
    if !dropped_item.is_empty() {
        log::warn!("dropped dependent item features: {}", dropped_item.join(", "));
    }
    Ok(MovieLensFeatures {
        side_info: SideInfo::new(x, y)?,
        user_columns,
        item_columns,
        dropped_user,
        dropped_item,
    })
}

/// Uniformly random `m` ratings for training, the rest for testing; both
/// returned sorted.
pub fn split_train_test(n_ratings: usize, m: usize, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if m == 0 || m >= n_ratings {
        return Err(Error::invalid(format!(
            "training size {m} must lie in 1..{n_ratings}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_ratings).collect();
    idx.shuffle(rng.core());
    let mut train = idx[..m].to_vec();
    let mut test = idx[m..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Root mean squared error, optionally clipping predictions to `[1, 5]`.
pub fn evaluate_rmse(predictions: &[f64], truth: &[f64], clip: bool) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::dims(format!(
            "{} predictions for {} held-out ratings",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let sse: f64 = predictions
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let p = if clip { p.clamp(1.0, 5.0) } else { p };
            (p - t) * (p - t)
        })
        .sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// RMSE of a dense estimate on the ratings indexed by `test`.
pub fn test_rmse(estimate: &Matrix, table: &RatingsTable, test: &[usize], clip: bool) -> Result<f64> {
    if estimate.shape() != (table.n_users(), table.n_items()) {
        return Err(Error::dims("estimate does not match the ratings grid"));
    }
    let (pred, truth): (Vec<f64>, Vec<f64>) = test
        .iter()
        .map(|&k| {
            let r = table.ratings[k];
            (estimate[(r.user, r.item)], f64::from(r.value))
        })
        .unzip();
    evaluate_rmse(&pred, &truth, clip)
}
