//! Experiment protocols. Each runner turns a validated config into a
//! [`ResultTable`] plus any per-iteration artifacts.
//!
//! Randomness: the ground truth comes from stream 0 of the seed and is shared
//! by every trial unless `regenerate_truth` is set; inexact side information
//! comes from stream 2, one draw per `delta`; every trial forks its own stream
//! from its grid coordinates, so results do not depend on scheduling.

use std::path::Path;

use imc_core::diagnostics::{effective_noise, misspec_residual, relative_error};
use imc_core::matrix::{GroundTruth, ObservationSet, SideInfo};
use imc_core::movielens::{self, FeatureSpec, RatingsTable};
use imc_core::solvers::{solve_imc, solve_interp, solve_mc, ProjectionMode, SolverConfig, SolverTrace};
use imc_core::synthetic::{gaussian_noise, gen_ground_truth, gen_inexact_side_info, observe, sample_omega, Rng};
use log::{info, warn};
use rand::RngCore;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{ExpError, Result};
use crate::stats::{argmin_prefer_last, complement, fold_partition, linear_fit};
use crate::table::{metric, Cell, Method, ResultTable};

/// A named text file written next to the results.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub table: ResultTable,
    pub artifacts: Vec<Artifact>,
}

/// Validates `cfg` and runs its experiment on a pool of `cfg.threads`
/// workers.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| ExpError::config(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.experiment {
        Experiment::Phase | Experiment::PhaseImcFine => run_phase(cfg),
        Experiment::NoisyError => run_noisy_error(cfg),
        Experiment::InexactError => run_inexact(cfg),
        Experiment::DeltaSweep => run_delta_sweep(cfg),
        Experiment::InterpSweep => run_interp(cfg),
        Experiment::InterpCv => run_interp_cv(cfg),
        Experiment::ProjectionCheck => run_projection_check(cfg),
        Experiment::Movielens => run_movielens(cfg),
    })
}

const TRUTH_STREAM: u64 = 0;
const TRIAL_STREAM: u64 = 1;
const SIDE_INFO_STREAM: u64 = 2;

fn trial_rng(cfg: &ExperimentConfig, d: usize, p: usize, trial: usize) -> Rng {
    Rng::new(cfg.seed, TRIAL_STREAM).fork(((d as u64) << 48) | ((p as u64) << 32) | trial as u64)
}

fn fixed_truth(cfg: &ExperimentConfig) -> Result<(GroundTruth, SideInfo)> {
    let mut rng = Rng::new(cfg.seed, TRUTH_STREAM);
    Ok(gen_ground_truth(cfg.n1, cfg.n2, cfg.a1, cfg.a2, cfg.rank, &mut rng)?)
}

/// Inexact side information for every `delta` in the grid, built around the
/// singular subspaces of `truth`.
fn inexact_side_info(cfg: &ExperimentConfig, truth: &GroundTruth, stream: u64) -> Result<Vec<SideInfo>> {
    let base = Rng::new(cfg.seed, SIDE_INFO_STREAM).fork(stream);
    cfg.delta_grid
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let mut rng = base.fork(k as u64);
            let x = gen_inexact_side_info(&truth.u_star, cfg.a1, delta, &mut rng)?.x;
            let y = gen_inexact_side_info(&truth.v_star, cfg.a2, delta, &mut rng)?.x;
            Ok(SideInfo::new(x, y)?)
        })
        .collect()
}

/// Truth and side information one trial works with: the shared instance,
/// or a fresh one drawn from the trial's stream.
struct Instance {
    truth: GroundTruth,
    exact: SideInfo,
    inexact: Vec<SideInfo>,
}

impl Instance {
    fn new(cfg: &ExperimentConfig, need_inexact: bool) -> Result<Self> {
        let (truth, exact) = fixed_truth(cfg)?;
        let inexact = if need_inexact { inexact_side_info(cfg, &truth, 0)? } else { Vec::new() };
        Ok(Self { truth, exact, inexact })
    }

    fn for_trial(&self, cfg: &ExperimentConfig, rng: &mut Rng, need_inexact: bool) -> Result<Option<Instance>> {
        if !cfg.regenerate_truth {
            return Ok(None);
        }
        let mut own = rng.fork(u64::MAX);
        let (truth, exact) = gen_ground_truth(cfg.n1, cfg.n2, cfg.a1, cfg.a2, cfg.rank, &mut own)?;
        let inexact = if need_inexact {
            inexact_side_info(cfg, &truth, 1 + own.next_u64())?
        } else {
            Vec::new()
        };
        Ok(Some(Instance { truth, exact, inexact }))
    }
}

/// Noise on a fresh sample, and the observations it produces.
fn draw_observations(
    cfg: &ExperimentConfig,
    truth: &GroundTruth,
    p: f64,
    rng: &mut Rng,
) -> Result<(ObservationSet, ObservationSet)> {
    let omega = sample_omega(cfg.n1, cfg.n2, p, rng)?;
    let noise = gaussian_noise(cfg.n1, cfg.n2, &omega, p, cfg.sigma, rng)?;
    let obs = observe(&truth.l_star, &noise)?;
    Ok((noise, obs))
}

fn solver_for_trial(cfg: &ExperimentConfig, rng: &mut Rng) -> SolverConfig {
    SolverConfig {
        seed: rng.next_u64(),
        ..cfg.solver(cfg.rank)
    }
}

/// Records the outcome of one solver run against a known truth. Failures
/// become a `failed` row (and a zero `success` when `success_tol` is given)
/// with no error row, so they drop out of error means.
fn record(
    t: &mut ResultTable,
    cfg: &ExperimentConfig,
    trial: usize,
    cell: Cell,
    method: Method,
    run: imc_core::Result<SolverTrace>,
    truth: &GroundTruth,
    with_success: bool,
) -> Option<SolverTrace> {
    let e = cfg.experiment;
    match run.map_err(ExpError::from).and_then(|tr| {
        let err = relative_error(&tr.estimate, &truth.l_star)?;
        Ok((tr, err))
    }) {
        Ok((tr, err)) => {
            t.push(e, Some(trial), cell, method, metric::REL_ERROR, err);
            t.push(e, Some(trial), cell, method, metric::ITERS, tr.iterations() as f64);
            if with_success {
                t.push(e, Some(trial), cell, method, metric::SUCCESS, f64::from(u8::from(err < cfg.success_tol)));
            }
            Some(tr)
        }
        Err(err) => {
            warn!("{e} trial {trial} {method} at {cell:?}: {err}");
            t.push_failure(e, trial, cell, method, &err.to_string());
            if with_success {
                t.push(e, Some(trial), cell, method, metric::SUCCESS, 0.0);
            }
            None
        }
    }
}

/// Runs `job` over `tasks` in parallel and concatenates the tables and
/// artifact lines in task order.
fn par_collect<T, F>(tasks: &[T], job: F) -> Result<(ResultTable, Vec<String>)>
where
    T: Sync,
    F: Fn(&T) -> Result<(ResultTable, Vec<String>)> + Sync + Send,
{
    let parts: Vec<Result<(ResultTable, Vec<String>)>> = tasks.par_iter().map(job).collect();
    let mut table = ResultTable::new();
    let mut lines = Vec::new();
    for part in parts {
        let (t, l) = part?;
        table.extend(t);
        lines.extend(l);
    }
    Ok((table, lines))
}

fn table_only((table, _): (ResultTable, Vec<String>)) -> RunOutput {
    RunOutput {
        table,
        artifacts: Vec::new(),
    }
}

fn with_trace((table, lines): (ResultTable, Vec<String>), name: &str, header: &str) -> RunOutput {
    let mut contents = format!("{header}\n");
    for l in lines {
        contents.push_str(&l);
        contents.push('\n');
    }
    RunOutput {
        table,
        artifacts: vec![Artifact {
            name: name.to_string(),
            contents,
        }],
    }
}

fn grid2(a: usize, b: usize) -> Vec<(usize, usize)> {
    (0..a).flat_map(|i| (0..b).map(move |j| (i, j))).collect()
}

fn grid3(a: usize, b: usize, c: usize) -> Vec<(usize, usize, usize)> {
    (0..a)
        .flat_map(|i| (0..b).flat_map(move |j| (0..c).map(move |k| (i, j, k))))
        .collect()
}

/// Exact recovery rates: noiseless (unless `sigma` says otherwise), exact
/// side information. The fine-grid variant runs IMC only.
pub fn run_phase(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inst = Instance::new(cfg, false)?;
    let with_mc = cfg.experiment != Experiment::PhaseImcFine;
    let tasks = grid2(cfg.p_grid.len(), cfg.trials);
    info!("{}: {} runs", cfg.experiment, tasks.len());
    let parts = par_collect(&tasks, |&(pi, trial)| {
        let p = cfg.p_grid[pi];
        let mut rng = trial_rng(cfg, 0, pi, trial);
        let own = inst.for_trial(cfg, &mut rng, false)?;
        let inst = own.as_ref().unwrap_or(&inst);
        let (_, obs) = draw_observations(cfg, &inst.truth, p, &mut rng)?;
        let solver = solver_for_trial(cfg, &mut rng);
        let mut t = ResultTable::new();
        let cell = Cell::p(p);
        let truth = Some(&inst.truth);
        record(&mut t, cfg, trial, cell, Method::Imc, solve_imc(&obs, &inst.exact, &solver, truth), &inst.truth, true);
        if with_mc {
            record(&mut t, cfg, trial, cell, Method::Mc, solve_mc(&obs, &solver, truth), &inst.truth, true);
        }
        Ok((t, Vec::new()))
    })?;
    Ok(table_only(parts))
}

/// Relative error under Gaussian noise with exact side information; also
/// records the effective noise level of each draw.
pub fn run_noisy_error(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inst = Instance::new(cfg, false)?;
    let tasks = grid2(cfg.p_grid.len(), cfg.trials);
    info!("{}: {} runs", cfg.experiment, tasks.len());
    let parts = par_collect(&tasks, |&(pi, trial)| {
        let p = cfg.p_grid[pi];
        let mut rng = trial_rng(cfg, 0, pi, trial);
        let own = inst.for_trial(cfg, &mut rng, false)?;
        let inst = own.as_ref().unwrap_or(&inst);
        let (noise, obs) = draw_observations(cfg, &inst.truth, p, &mut rng)?;
        let solver = solver_for_trial(cfg, &mut rng);
        let mut t = ResultTable::new();
        let cell = Cell::p(p);
        let gamma = effective_noise(&noise, &inst.exact)?;
        t.push(cfg.experiment, Some(trial), cell, Method::Instance, metric::GAMMA_E, gamma);
        let truth = Some(&inst.truth);
        record(&mut t, cfg, trial, cell, Method::Imc, solve_imc(&obs, &inst.exact, &solver, truth), &inst.truth, false);
        record(&mut t, cfg, trial, cell, Method::Mc, solve_mc(&obs, &solver, truth), &inst.truth, false);
        Ok((t, Vec::new()))
    })?;
    Ok(table_only(parts))
}

fn inexact_cells(cfg: &ExperimentConfig, with_mc: bool) -> Result<RunOutput> {
    let inst = Instance::new(cfg, true)?;
    let tasks = grid3(cfg.delta_grid.len(), cfg.p_grid.len(), cfg.trials);
    info!("{}: {} runs", cfg.experiment, tasks.len());
    let mut out = table_only(par_collect(&tasks, |&(di, pi, trial)| {
        let (delta, p) = (cfg.delta_grid[di], cfg.p_grid[pi]);
        let mut rng = trial_rng(cfg, di, pi, trial);
        let own = inst.for_trial(cfg, &mut rng, true)?;
        let inst = own.as_ref().unwrap_or(&inst);
        let (_, obs) = draw_observations(cfg, &inst.truth, p, &mut rng)?;
        let solver = solver_for_trial(cfg, &mut rng);
        let mut t = ResultTable::new();
        let cell = Cell::p(p).with_delta(delta);
        let truth = Some(&inst.truth);
        let si = &inst.inexact[di];
        record(&mut t, cfg, trial, cell, Method::Imc, solve_imc(&obs, si, &solver, truth), &inst.truth, false);
        if with_mc {
            record(&mut t, cfg, trial, cell, Method::Mc, solve_mc(&obs, &solver, truth), &inst.truth, false);
        }
        Ok((t, Vec::new()))
    })?);
    if !cfg.regenerate_truth {
        // error floor implied by the part of L* outside the side information
        let norm = inst.truth.l_star.norm();
        for (di, &delta) in cfg.delta_grid.iter().enumerate() {
            let bound = 0.25 * misspec_residual(&inst.truth.l_star, &inst.inexact[di])? / norm;
            let cell = Cell {
                delta: Some(delta),
                ..Cell::default()
            };
            out.table.push(cfg.experiment, None, cell, Method::Instance, metric::MISSPEC_BOUND, bound);
        }
    }
    Ok(out)
}

/// IMC and MC error across sample rates for each inexactness level.
pub fn run_inexact(cfg: &ExperimentConfig) -> Result<RunOutput> {
    inexact_cells(cfg, true)
}

/// IMC error as a function of `delta`, with a least-squares line through
/// the per-`delta` means at each sample rate.
pub fn run_delta_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = inexact_cells(cfg, false)?;
    for &p in &cfg.p_grid {
        let (xs, ys): (Vec<f64>, Vec<f64>) = cfg
            .delta_grid
            .iter()
            .filter_map(|&d| {
                out.table
                    .mean(Method::Imc, metric::REL_ERROR, Some(p), Some(d), None)
                    .map(|m| (d, m))
            })
            .unzip();
        if let Some(fit) = linear_fit(&xs, &ys) {
            let e = cfg.experiment;
            out.table.push(e, None, Cell::p(p), Method::Imc, metric::SLOPE, fit.slope);
            out.table.push(e, None, Cell::p(p), Method::Imc, metric::INTERCEPT, fit.intercept);
            out.table.push(e, None, Cell::p(p), Method::Imc, metric::R2, fit.r2);
        }
    }
    Ok(out)
}

/// Interpolation error over the whole penalty grid, with IMC and MC as
/// references, at the first `delta` of the grid.
pub fn run_interp(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inst = Instance::new(cfg, true)?;
    let delta = cfg.delta_grid[0];
    let tasks = grid2(cfg.p_grid.len(), cfg.trials);
    info!(
        "{}: {} trials x {} penalties",
        cfg.experiment,
        tasks.len(),
        cfg.lambda_grid.len()
    );
    let mut out = table_only(par_collect(&tasks, |&(pi, trial)| {
        let p = cfg.p_grid[pi];
        let mut rng = trial_rng(cfg, 0, pi, trial);
        let own = inst.for_trial(cfg, &mut rng, true)?;
        let inst = own.as_ref().unwrap_or(&inst);
        let (_, obs) = draw_observations(cfg, &inst.truth, p, &mut rng)?;
        let solver = solver_for_trial(cfg, &mut rng);
        let si = &inst.inexact[0];
        let mut t = ResultTable::new();
        let cell = Cell::p(p).with_delta(delta);
        let truth = Some(&inst.truth);
        record(&mut t, cfg, trial, cell, Method::Imc, solve_imc(&obs, si, &solver, truth), &inst.truth, false);
        record(&mut t, cfg, trial, cell, Method::Mc, solve_mc(&obs, &solver, truth), &inst.truth, false);
        for &lambda in &cfg.lambda_grid {
            let run = solve_interp(&obs, si, lambda, &solver, truth);
            record(&mut t, cfg, trial, cell.with_lambda(lambda), Method::Interp, run, &inst.truth, false);
        }
        Ok((t, Vec::new()))
    })?);
    for &p in &cfg.p_grid {
        let means: Vec<f64> = cfg
            .lambda_grid
            .iter()
            .map(|&l| {
                out.table
                    .mean(Method::Interp, metric::REL_ERROR, Some(p), Some(delta), Some(l))
                    .unwrap_or(f64::NAN)
            })
            .collect();
        if let Some(k) = argmin_prefer_last(&means).filter(|&k| means[k].is_finite()) {
            let cell = Cell::p(p).with_delta(delta);
            out.table.push(cfg.experiment, None, cell, Method::Interp, metric::ARGMIN_LAMBDA, cfg.lambda_grid[k]);
        }
    }
    Ok(out)
}

/// Mean squared error of `estimate` on the entries of `obs` listed in `idx`.
fn holdout_mse(estimate: &imc_core::Matrix, obs: &ObservationSet, idx: &[usize]) -> f64 {
    let e = obs.entries();
    idx.iter().map(|&k| (estimate[(e[k].i, e[k].j)] - e[k].v).powi(2)).sum::<f64>() / idx.len() as f64
}

/// Penalty chosen by k-fold cross-validation on the observed entries, then
/// refit on all of them. Ties in validation error go to the larger penalty.
pub fn cross_validate_lambda(
    obs: &ObservationSet,
    si: &SideInfo,
    lambdas: &[f64],
    folds: usize,
    solver: &SolverConfig,
    rng: &mut Rng,
) -> Result<(usize, Vec<f64>)> {
    let parts = fold_partition(obs.len(), folds, rng)?;
    let train_p = obs.p() * (folds - 1) as f64 / folds as f64;
    let trains: Vec<ObservationSet> = parts
        .iter()
        .map(|f| obs.subset(&complement(obs.len(), f), train_p))
        .collect::<imc_core::Result<_>>()?;
    let scores: Vec<f64> = lambdas
        .iter()
        .map(|&lambda| {
            let mut total = 0.0;
            for (fold, train) in parts.iter().zip(&trains) {
                match solve_interp(train, si, lambda, solver, None) {
                    Ok(tr) => total += holdout_mse(&tr.estimate, obs, fold),
                    Err(e) => {
                        warn!("cross-validation fit at lambda {lambda} failed: {e}");
                        return f64::INFINITY;
                    }
                }
            }
            total / folds as f64
        })
        .collect();
    let best = argmin_prefer_last(&scores).expect("nonempty grid");
    Ok((best, scores))
}

/// Cross-validated interpolation against IMC and MC.
pub fn run_interp_cv(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inst = Instance::new(cfg, true)?;
    let delta = cfg.delta_grid[0];
    let tasks = grid2(cfg.p_grid.len(), cfg.trials);
    info!(
        "{}: {} trials, {} folds x {} penalties each",
        cfg.experiment,
        tasks.len(),
        cfg.folds,
        cfg.lambda_grid.len()
    );
    let parts = par_collect(&tasks, |&(pi, trial)| {
        let p = cfg.p_grid[pi];
        let mut rng = trial_rng(cfg, 0, pi, trial);
        let own = inst.for_trial(cfg, &mut rng, true)?;
        let inst = own.as_ref().unwrap_or(&inst);
        let (_, obs) = draw_observations(cfg, &inst.truth, p, &mut rng)?;
        let solver = solver_for_trial(cfg, &mut rng);
        let si = &inst.inexact[0];
        let e = cfg.experiment;
        let mut t = ResultTable::new();
        let cell = Cell::p(p).with_delta(delta);
        let truth = Some(&inst.truth);
        let (best, scores) = cross_validate_lambda(&obs, si, &cfg.lambda_grid, cfg.folds, &solver, &mut rng)?;
        for (&lambda, &s) in cfg.lambda_grid.iter().zip(&scores) {
            if s.is_finite() {
                t.push(e, Some(trial), cell.with_lambda(lambda), Method::Interp, metric::CV_MSE, s);
            } else {
                t.push_failure(e, trial, cell.with_lambda(lambda), Method::Interp, "a cross-validation fit failed");
            }
        }
        let lambda = cfg.lambda_grid[best];
        t.push(e, Some(trial), cell, Method::InterpCv, metric::SELECTED_LAMBDA, lambda);
        let refit = solve_interp(&obs, si, lambda, &solver, truth);
        record(&mut t, cfg, trial, cell, Method::InterpCv, refit, &inst.truth, false);
        record(&mut t, cfg, trial, cell, Method::Imc, solve_imc(&obs, si, &solver, truth), &inst.truth, false);
        record(&mut t, cfg, trial, cell, Method::Mc, solve_mc(&obs, &solver, truth), &inst.truth, false);
        Ok((t, Vec::new()))
    })?;
    Ok(table_only(parts))
}

pub const PROJECTION_TRACE_HEADER: &str = "p,trial,iter,ratio_a,ratio_b";

/// Unprojected IMC runs that log how close the iterates come to the
/// boundary of the constraint set.
pub fn run_projection_check(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let inst = Instance::new(cfg, false)?;
    let tasks = grid2(cfg.p_grid.len(), cfg.trials);
    info!("{}: {} runs", cfg.experiment, tasks.len());
    let parts = par_collect(&tasks, |&(pi, trial)| {
        let p = cfg.p_grid[pi];
        let mut rng = trial_rng(cfg, 0, pi, trial);
        let own = inst.for_trial(cfg, &mut rng, false)?;
        let inst = own.as_ref().unwrap_or(&inst);
        let (_, obs) = draw_observations(cfg, &inst.truth, p, &mut rng)?;
        let solver = SolverConfig {
            projection: ProjectionMode::Monitor,
            loss_floor: 0.0,
            ..solver_for_trial(cfg, &mut rng)
        };
        let mut t = ResultTable::new();
        let cell = Cell::p(p);
        let run = solve_imc(&obs, &inst.exact, &solver, Some(&inst.truth));
        let Some(tr) = record(&mut t, cfg, trial, cell, Method::Imc, run, &inst.truth, false) else {
            return Ok((t, Vec::new()));
        };
        let radius = tr.radius.expect("monitor mode reports a radius");
        let mut lines = Vec::with_capacity(tr.records.len());
        let (mut max_a, mut max_b) = (0.0f64, 0.0f64);
        for r in &tr.records {
            let (ra, rb) = (r.two_inf_a / radius, r.two_inf_b / radius);
            max_a = max_a.max(ra);
            max_b = max_b.max(rb);
            lines.push(format!("{p},{trial},{},{ra},{rb}", r.iter));
        }
        let e = cfg.experiment;
        t.push(e, Some(trial), cell, Method::Imc, metric::MAX_RATIO_A, max_a);
        t.push(e, Some(trial), cell, Method::Imc, metric::MAX_RATIO_B, max_b);
        let active = f64::from(u8::from(tr.projection_ever_active()));
        t.push(e, Some(trial), cell, Method::Imc, metric::PROJECTION_ACTIVE, active);
        Ok((t, lines))
    })?;
    Ok(with_trace(parts, "projection_trace.csv", PROJECTION_TRACE_HEADER))
}

pub const MOVIELENS_HEADER: &str = "m,trial,method,rmse";

/// Loads the ratings named by `cfg.data_dir`. Non-canonical inputs (subsets,
/// test fixtures) are accepted with a warning.
pub fn load_ratings(dir: &Path) -> Result<RatingsTable> {
    let table = movielens::load_movielens_unchecked(dir)?;
    if let Err(e) = table.check_canonical() {
        warn!("{e}");
    }
    Ok(table)
}

/// Test RMSE of IMC and MC on random train/test splits of the ratings.
pub fn run_movielens(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let dir = cfg
        .data_dir
        .as_deref()
        .ok_or_else(|| ExpError::config("the movielens experiment needs data_dir"))?;
    let table = load_ratings(dir)?;
    if let Some(&m) = cfg.m_grid.iter().find(|&&m| m >= table.len()) {
        return Err(ExpError::config(format!(
            "training size {m} leaves no test ratings out of {}",
            table.len()
        )));
    }
    let spec = FeatureSpec {
        svd_components: cfg.svd_components,
        ..FeatureSpec::default()
    };
    let tasks = grid2(cfg.m_grid.len(), cfg.trials);
    info!("{}: {} splits", cfg.experiment, tasks.len());
    let parts = par_collect(&tasks, |&(mi, trial)| {
        let m = cfg.m_grid[mi];
        let mut rng = trial_rng(cfg, 0, mi, trial);
        let (train, test) = movielens::split_train_test(table.len(), m, &mut rng)?;
        let solver = solver_for_trial(cfg, &mut rng);
        let feats = movielens::build_side_info(&table, &train, &spec, solver.seed)?;
        let p_hat = table.empirical_p(m);
        let obs = table.observations(&train, p_hat)?;
        let e = cfg.experiment;
        let cell = Cell::p(p_hat);
        let mut t = ResultTable::new();
        let mut lines = Vec::new();
        let (zu, zi) = table.unobserved_counts(&train);
        t.push(e, Some(trial), cell, Method::Instance, metric::TRAIN_SIZE, m as f64);
        t.push(e, Some(trial), cell, Method::Instance, metric::ZERO_USERS, zu as f64);
        t.push(e, Some(trial), cell, Method::Instance, metric::ZERO_ITEMS, zi as f64);
        let runs = [
            (Method::Imc, solve_imc(&obs, &feats.side_info, &solver, None)),
            (Method::Mc, solve_mc(&obs, &solver, None)),
        ];
        for (method, run) in runs {
            let scored = run
                .map_err(ExpError::from)
                .and_then(|tr| Ok(movielens::test_rmse(&tr.estimate, &table, &test, cfg.clip_ratings)?));
            match scored {
                Ok(rmse) => {
                    t.push(e, Some(trial), cell, method, metric::RMSE, rmse);
                    lines.push(format!("{m},{trial},{method},{rmse}"));
                }
                Err(err) => {
                    warn!("{e} m={m} trial {trial} {method}: {err}");
                    t.push_failure(e, trial, cell, method, &err.to_string());
                }
            }
        }
        Ok((t, lines))
    })?;
    Ok(with_trace(parts, "movielens_rmse.csv", MOVIELENS_HEADER))
}
