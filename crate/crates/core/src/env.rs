//! MDP environment: one transition step and its reward.
//!
//! Rewards follow the two-branch rule: an in-bounds move earns
//! `f(s) - f(s')` (positive when the objective improved), a rejected move
//! leaves the state unchanged and earns `-x` where `x` counts the
//! dimensions that would have left their range.

use std::cell::RefCell;

use rand::Rng;

use crate::error::Result;
use crate::grid::{GridState, Move, MoveAction, ParameterGrid};
use crate::predictor::{evaluate, ObjectiveSpec, PredictorSource};
use crate::scalar::Real;

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<F> {
    pub next_state: GridState,
    pub reward: F,
    /// True when the move was rejected at the boundary.
    pub blocked: bool,
    /// Objective value of `next_state`, cached for reporting.
    pub objective_after: F,
}

/// Immutable problem instance plus a per-instance objective memo.
///
/// Predictors are deterministic, so objective values are memoized by state
/// index; the memo is observable only as speed. Blocked steps read the memo
/// and never trigger a fresh prediction (the current state's value is
/// always cached before any move is attempted from it).
pub struct Environment<'a, F> {
    grid: &'a ParameterGrid<F>,
    source: &'a PredictorSource<F>,
    spec: &'a ObjectiveSpec<F>,
    cache: RefCell<Vec<Option<F>>>,
}

impl<'a, F: Real> Environment<'a, F> {
    pub fn new(
        grid: &'a ParameterGrid<F>,
        source: &'a PredictorSource<F>,
        spec: &'a ObjectiveSpec<F>,
    ) -> Self {
        Self {
            grid,
            source,
            spec,
            cache: RefCell::new(vec![None; grid.state_count()]),
        }
    }

    pub fn grid(&self) -> &ParameterGrid<F> {
        self.grid
    }

    pub fn objective_spec(&self) -> &ObjectiveSpec<F> {
        self.spec
    }

    /// Objective value `f(state)`, memoized.
    pub fn evaluate_state(&self, state: &GridState) -> Result<F> {
        let idx = self.grid.encode_state(state)?;
        if let Some(v) = self.cache.borrow()[idx] {
            return Ok(v);
        }
        let v = evaluate(self.grid, self.source, self.spec, state)?;
        self.cache.borrow_mut()[idx] = Some(v);
        Ok(v)
    }

    /// Execute one transition from `state` under `action`.
    pub fn step(&self, state: &GridState, action: &MoveAction) -> Result<StepOutcome<F>> {
        match self.grid.apply_action(state, action)? {
            Move::InBounds(next) => {
                let f_before = self.evaluate_state(state)?;
                let f_after = self.evaluate_state(&next)?;
                Ok(StepOutcome {
                    next_state: next,
                    reward: f_before - f_after,
                    blocked: false,
                    objective_after: f_after,
                })
            }
            Move::OutOfBounds(violations) => {
                let f_here = self.evaluate_state(state)?;
                Ok(StepOutcome {
                    next_state: state.clone(),
                    reward: -F::from_usize(violations).unwrap(),
                    blocked: true,
                    objective_after: f_here,
                })
            }
        }
    }

    /// Draw a uniformly random lattice state, one level per dimension.
    pub fn random_initial_state<R: Rng>(&self, rng: &mut R) -> GridState {
        let levels = self
            .grid
            .dims()
            .iter()
            .map(|d| rng.gen_range(0..d.level_count()))
            .collect();
        GridState::new(levels)
    }
}
