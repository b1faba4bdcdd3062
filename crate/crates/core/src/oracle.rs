//! Ground-truth machinery: exhaustive search over the whole lattice,
//! objective-distribution statistics and simple baselines.
//!
//! The default grid has 36960 states, so exhaustive evaluation is cheap
//! and serves as the oracle against which the learner is validated.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{GridState, Move, ParameterGrid};
use crate::predictor::{evaluate, ObjectiveSpec, PredictorSource};
use crate::scalar::Real;

/// Quantile levels reported by the oracle.
pub const REPORT_QUANTILES: [f64; 8] = [0.0, 0.001, 0.005, 0.01, 0.05, 0.25, 0.5, 1.0];

/// Outcome of an exhaustive sweep.
#[derive(Debug, Clone)]
pub struct OracleResult<F> {
    pub optimum: GridState,
    pub optimum_objective: F,
    /// All objective values, sorted ascending.
    pub distribution: Vec<F>,
    pub evaluation_count: usize,
}

impl<F: Real> OracleResult<F> {
    /// Empirical quantile of the objective distribution, by nearest-rank
    /// on the sorted values.
    pub fn quantile(&self, q: f64) -> F {
        let n = self.distribution.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.distribution[rank - 1]
    }
}

/// JSON-facing summary of an oracle run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport<F> {
    pub optimum_raw: Vec<F>,
    pub optimum_levels: Vec<usize>,
    pub optimum_objective: F,
    pub quantiles: Vec<(f64, F)>,
    pub evaluation_count: usize,
    pub wall_time_secs: f64,
}

impl<F: Real> OracleResult<F> {
    pub fn report(&self, grid: &ParameterGrid<F>, wall_time_secs: f64) -> Result<OracleReport<F>> {
        Ok(OracleReport {
            optimum_raw: grid.raw_values(&self.optimum)?,
            optimum_levels: self.optimum.levels.clone(),
            optimum_objective: self.optimum_objective,
            quantiles: REPORT_QUANTILES
                .iter()
                .map(|&q| (q, self.quantile(q)))
                .collect(),
            evaluation_count: self.evaluation_count,
            wall_time_secs,
        })
    }
}

/// Evaluate every lattice state exactly once; ties broken by lowest state
/// index so results are deterministic across runs and implementations.
pub fn brute_force<F: Real>(
    grid: &ParameterGrid<F>,
    source: &PredictorSource<F>,
    spec: &ObjectiveSpec<F>,
) -> Result<OracleResult<F>> {
    let count = grid.state_count();
    let mut distribution = Vec::with_capacity(count);
    let mut best: Option<(F, usize)> = None;
    for idx in 0..count {
        let state = grid.decode_state(idx)?;
        let f = evaluate(grid, source, spec, &state)?;
        if best.is_none_or(|(bf, _)| f < bf) {
            best = Some((f, idx));
        }
        distribution.push(f);
    }
    let (optimum_objective, optimum_idx) = best.expect("grid is non-empty");
    distribution.sort_by(|a, b| a.partial_cmp(b).expect("objective values are finite"));
    Ok(OracleResult {
        optimum: grid.decode_state(optimum_idx)?,
        optimum_objective,
        distribution,
        evaluation_count: count,
    })
}

/// How `random_search` draws its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    WithReplacement,
    /// A seeded permutation of the state indices; a budget equal to the
    /// state count degenerates to exhaustive search.
    WithoutReplacement,
}

/// Uniform random sampling baseline; deterministic per seed.
pub fn random_search<F: Real>(
    grid: &ParameterGrid<F>,
    source: &PredictorSource<F>,
    spec: &ObjectiveSpec<F>,
    budget: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<(GridState, F)> {
    assert!(budget >= 1, "budget must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = grid.state_count();
    let indices: Vec<usize> = match mode {
        SamplingMode::WithReplacement => (0..budget).map(|_| rng.gen_range(0..count)).collect(),
        SamplingMode::WithoutReplacement => {
            let mut all: Vec<usize> = (0..count).collect();
            all.shuffle(&mut rng);
            all.truncate(budget.min(count));
            all
        }
    };
    let mut best: Option<(F, usize)> = None;
    for idx in indices {
        let f = evaluate(grid, source, spec, &grid.decode_state(idx)?)?;
        if best.is_none_or(|(bf, bi)| (f, idx) < (bf, bi)) {
            best = Some((f, idx));
        }
    }
    let (f, idx) = best.expect("budget >= 1");
    Ok((grid.decode_state(idx)?, f))
}

/// Best-improvement hill climbing over the 80 non-hold lattice moves.
/// Strict descent guarantees termination at a local minimum.
pub fn hill_climb<F: Real>(
    grid: &ParameterGrid<F>,
    source: &PredictorSource<F>,
    spec: &ObjectiveSpec<F>,
    start: &GridState,
) -> Result<(GridState, F)> {
    let mut current = start.clone();
    let mut current_f = evaluate(grid, source, spec, &current)?;
    loop {
        let mut improved: Option<(F, usize, GridState)> = None;
        for action_idx in 0..grid.action_count() {
            let action = grid.decode_action(action_idx)?;
            if action.is_hold() {
                continue;
            }
            if let Move::InBounds(next) = grid.apply_action(&current, &action)? {
                let f = evaluate(grid, source, spec, &next)?;
                if f < current_f {
                    let idx = grid.encode_state(&next)?;
                    let better = match &improved {
                        Some((bf, bi, _)) => (f, idx) < (*bf, *bi),
                        None => true,
                    };
                    if better {
                        improved = Some((f, idx, next));
                    }
                }
            }
        }
        match improved {
            Some((f, _, next)) => {
                current = next;
                current_f = f;
            }
            None => return Ok((current, current_f)),
        }
    }
}
