//! Constrained least-squares estimator for stochastic factorizations.
//!
//! The estimator chooses H to minimize the concentrated, penalized objective
//! in [`objective`] with W eliminated as `X H⁺`. H itself never leaves its
//! feasible set (the unit box, intersected with the row simplex when H is
//! stochastic). Each outer iteration builds a proposal by one sweep of
//! alternating constrained least squares (W rows projected onto their
//! feasible set, then H), and accepts it only if the objective drops. When
//! the proposal does not improve, a projected-gradient step with halving
//! backtracking is tried from the current iterate instead. Accepted iterates
//! therefore never increase the objective.

mod als;
mod config;
mod objective;

pub use config::{Mode, SolverConfig};
pub use objective::{concentrate_w, objective, objective_gradient};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SmfError};
use crate::factors::FactorPair;
use crate::matrix::DenseMatrix;

use als::RowSet;
use objective::{evaluate, gradient, Weights};

/// Slack for the X-rows-sum-to-one precondition in the H-stochastic case.
const ROW_SUM_SLACK: f64 = 1e-6;
/// Backtracking gives up below this step length.
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub factors: FactorPair,
    pub objective: f64,
    /// Objective of the accepted iterate after each outer iteration of the
    /// winning restart, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Final objective of every restart, by restart index.
    pub restart_objectives: Vec<f64>,
}

/// Per-iteration progress, passed to the optional callback.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Progress {
    pub restart: usize,
    pub iteration: usize,
    pub objective: f64,
}

struct RestartOutcome {
    h: DenseMatrix,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

pub fn factorize(x: &DenseMatrix, config: &SolverConfig) -> Result<SolveResult> {
    factorize_with_progress(x, config, None)
}

pub fn factorize_with_progress(
    x: &DenseMatrix,
    config: &SolverConfig,
    progress: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<SolveResult> {
    check_input(x, config)?;

    if config.rank == 1 && config.orientation.w_stochastic() {
        return solve_rank_one(x, config);
    }

    let run = |restart: usize| run_restart(x, config, restart, progress);
    let outcomes: Vec<Result<RestartOutcome>> = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| SmfError::invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..config.restarts).into_par_iter().map(run).collect())
    } else {
        (0..config.restarts).map(run).collect()
    };

    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut restart_objectives = Vec::with_capacity(config.restarts);
    let mut last_err = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                restart_objectives.push(o.objective);
                // strict comparison keeps the lowest index on ties
                if best.as_ref().is_none_or(|(_, b)| o.objective < b.objective) {
                    best = Some((idx, o));
                }
            }
            Err(e) => {
                restart_objectives.push(f64::INFINITY);
                last_err = Some(e);
            }
        }
    }
    let (best_restart, outcome) = match best {
        Some(b) => b,
        None => return Err(last_err.unwrap_or_else(|| SmfError::invalid("no restarts ran"))),
    };

    let factors = finish(x, outcome.h, config)?;
    Ok(SolveResult {
        factors,
        objective: outcome.objective,
        objective_trace: outcome.trace,
        iterations: outcome.iterations,
        converged: outcome.converged,
        best_restart,
        restart_objectives,
    })
}

fn check_input(x: &DenseMatrix, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    x.ensure_finite()?;
    let (n, m) = x.shape();
    if config.rank >= n.min(m) {
        return Err(SmfError::invalid(format!(
            "rank {} must be smaller than both dimensions of the {n}x{m} input",
            config.rank
        )));
    }
    for (i, row) in x.row_iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v < 0.0) {
            return Err(SmfError::invalid(format!("X[{i},{j}] = {} is negative", row[j])));
        }
        if config.orientation.h_stochastic() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_SLACK {
                return Err(SmfError::invalid(format!(
                    "row {i} of X sums to {s}; row-normalize documents first"
                )));
            }
        }
    }
    Ok(())
}

fn w_set(config: &SolverConfig) -> RowSet {
    if config.orientation.w_stochastic() {
        RowSet::Simplex
    } else {
        RowSet::NonNegative
    }
}

fn h_set(config: &SolverConfig) -> RowSet {
    if config.orientation.h_stochastic() {
        RowSet::Simplex
    } else {
        RowSet::UnitBox
    }
}

fn initial_h(config: &SolverConfig, cols: usize, restart: usize) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart as u64));
    let mut h = DenseMatrix::from_fn(config.rank, cols, |_, _| rng.random::<f64>());
    if config.orientation.h_stochastic() {
        for k in 0..h.rows() {
            let row = h.row_mut(k);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    h
}

fn run_restart(
    x: &DenseMatrix,
    config: &SolverConfig,
    restart: usize,
    progress: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<RestartOutcome> {
    let wt = Weights::from(config);
    let value_of = |h: &DenseMatrix| evaluate(x, h, wt).map(|e| e.value).unwrap_or(f64::INFINITY);

    let mut h = initial_h(config, x.cols(), restart);
    let first = evaluate(x, &h, wt)?;
    let mut f = first.value;
    let mut trace = vec![f];

    let mut w_aux = first.w;
    als::project(&mut w_aux, w_set(config));
    let mut h_aux = h.clone();
    let mut prev_candidate = f64::INFINITY;
    let mut step = 1.0f64;
    let exact_fit = config.conv_tol * x.frobenius_norm();
    let mut converged = f <= exact_fit;
    let mut iterations = 0;

    while !converged && iterations < config.max_iter {
        iterations += 1;
        let before = f;

        w_aux = als::update_w(x, &h_aux, &w_aux, config.inner_iters, w_set(config));
        h_aux = als::update_h(x, &w_aux, &h_aux, config.inner_iters, h_set(config));
        let candidate = value_of(&h_aux);

        if candidate < f {
            h = h_aux.clone();
            f = candidate;
        } else if let Ok(ev) = evaluate(x, &h, wt) {
            let g = gradient(&h, &ev, wt);
            let mut t = (2.0 * step).min(1.0);
            while t >= MIN_STEP {
                let mut trial = h.zip_map(&g, |a, b| a - t * b);
                als::project(&mut trial, h_set(config));
                let ft = value_of(&trial);
                if ft < f {
                    h = trial;
                    f = ft;
                    step = t;
                    break;
                }
                t *= 0.5;
            }
        }

        trace.push(f);
        if let Some(cb) = progress {
            cb(&Progress {
                restart,
                iteration: iterations,
                objective: f,
            });
        }

        let accepted_change = (before - f) / before.max(f64::MIN_POSITIVE);
        let candidate_change = (prev_candidate - candidate).abs() / prev_candidate.abs().max(f64::MIN_POSITIVE);
        prev_candidate = candidate;
        converged = f <= exact_fit || (accepted_change < config.conv_tol && candidate_change < config.conv_tol);
    }

    Ok(RestartOutcome {
        h,
        objective: f,
        trace,
        iterations,
        converged,
    })
}

/// With one factor W must be the all-ones column, so H is the column mean of
/// X (projected onto its feasible set).
fn solve_rank_one(x: &DenseMatrix, config: &SolverConfig) -> Result<SolveResult> {
    let mut h = DenseMatrix::row_vector(&x.col_means());
    als::project(&mut h, h_set(config));
    let f = objective(x, &h, config)?;
    let factors = finish(x, h, config)?;
    Ok(SolveResult {
        factors,
        objective: f,
        objective_trace: vec![f],
        iterations: 0,
        converged: true,
        best_restart: 0,
        restart_objectives: vec![f; config.restarts],
    })
}

/// Builds the returned factor pair with W = X H⁺ moved onto its feasible
/// set. H is already feasible: every iterate stays in its set.
fn finish(x: &DenseMatrix, h: DenseMatrix, config: &SolverConfig) -> Result<FactorPair> {
    let mut w = concentrate_w(x, &h)?;
    als::project(&mut w, w_set(config));
    FactorPair::new(w, h, config.orientation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::Orientation;

    fn anchored_instance() -> (DenseMatrix, DenseMatrix, DenseMatrix) {
        let w = DenseMatrix::from_rows(&[
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.2, 0.5, 0.3],
            [0.6, 0.1, 0.3],
            [0.3, 0.3, 0.4],
            [0.1, 0.8, 0.1],
            [0.5, 0.0, 0.5],
        ])
        .unwrap();
        let h = DenseMatrix::from_rows(&[
            [0.9, 0.0, 0.0, 0.5, 0.2, 0.7],
            [0.0, 0.8, 0.0, 0.3, 0.9, 0.1],
            [0.0, 0.0, 0.7, 0.6, 0.4, 0.2],
        ])
        .unwrap();
        let x = w.dot(&h);
        (x, w, h)
    }

    #[test]
    fn rejects_bad_rank_and_negative_input() {
        let (x, _, _) = anchored_instance();
        let mut c = SolverConfig::new(6, Orientation::WRowsSumTo1);
        assert!(matches!(factorize(&x, &c), Err(SmfError::InvalidInput(_))));
        c.rank = 2;
        let mut neg = x.clone();
        neg[(0, 0)] = -0.1;
        assert!(factorize(&neg, &c).is_err());
    }

    #[test]
    fn topic_orientation_requires_normalized_rows() {
        let x = DenseMatrix::filled(6, 5, 0.3);
        let c = SolverConfig::new(2, Orientation::Both);
        assert!(factorize(&x, &c).is_err());
    }

    #[test]
    fn rank_one_image_case_is_column_mean() {
        let x = DenseMatrix::from_rows(&[[0.2, 0.4, 0.9], [0.6, 0.0, 0.7], [0.1, 0.5, 0.8], [0.3, 0.3, 0.2]]).unwrap();
        let res = factorize(&x, &SolverConfig::new(1, Orientation::WRowsSumTo1)).unwrap();
        let means = x.col_means();
        for (j, m) in means.iter().enumerate() {
            assert!((res.factors.h()[(0, j)] - m).abs() < 1e-12);
        }
        assert!(res.factors.w().as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn recovers_small_anchored_instance() {
        let (x, _, h) = anchored_instance();
        let mut c = SolverConfig::new(3, Orientation::WRowsSumTo1);
        c.seed = 3;
        let res = factorize(&x, &c).unwrap();
        assert!(res.objective < 1e-4, "objective {}", res.objective);
        // compare up to row permutation
        let est = res.factors.h();
        let mut total = 0.0;
        for k in 0..3 {
            let best = (0..3)
                .map(|l| est.select_rows(&[l]).sub(&h.select_rows(&[k])).max_abs())
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        assert!(total < 3e-2, "row mismatch {total}");
    }

    #[test]
    fn trace_is_monotone_and_seeded() {
        let (x, _, _) = anchored_instance();
        let mut c = SolverConfig::new(3, Orientation::WRowsSumTo1);
        c.max_iter = 60;
        c.restarts = 2;
        c.seed = 17;
        let a = factorize(&x, &c).unwrap();
        for pair in a.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9);
        }
        let b = factorize(&x, &c).unwrap();
        assert_eq!(a.factors, b.factors);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn progress_callback_sees_every_iteration() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let (x, _, _) = anchored_instance();
        let mut c = SolverConfig::new(2, Orientation::WRowsSumTo1);
        c.max_iter = 7;
        c.restarts = 1;
        c.conv_tol = 0.0;
        let calls = AtomicUsize::new(0);
        let cb = |_: &Progress| {
            calls.fetch_add(1, Ordering::Relaxed);
        };
        let res = factorize_with_progress(&x, &c, Some(&cb)).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), res.iterations);
    }
}
