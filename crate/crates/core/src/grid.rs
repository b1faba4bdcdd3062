//! Discretized parameter lattice: dimensions, state/action encodings and
//! bounds checking.
//!
//! A state is a point on the lattice, addressed either by per-dimension
//! level indices or by a dense mixed-radix integer index (dimension 0 most
//! significant). Actions move one grid step per dimension: decrease, hold
//! or increase, giving `3^n` actions for an `n`-dimensional grid.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance used when snapping raw parameter values onto levels.
const SNAP_TOL: f64 = 1e-6;

/// One lattice dimension: a closed range `[min, max]` walked in units of `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDim<F> {
    pub name: String,
    pub min: F,
    pub max: F,
    pub step: F,
}

impl<F: Real> ParameterDim<F> {
    pub fn new(name: impl Into<String>, min: F, max: F, step: F) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidDimension {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return Err(invalid("bounds and step must be finite"));
        }
        if min > max {
            return Err(invalid("min must not exceed max"));
        }
        if step <= F::zero() {
            return Err(invalid("step must be positive"));
        }
        let span = (max - min).to_f64_lossy();
        let step64 = step.to_f64_lossy();
        let steps = (span / step64).round();
        if (steps * step64 - span).abs() > SNAP_TOL * span.abs().max(1.0) {
            return Err(invalid("max - min must be an integer multiple of step"));
        }
        Ok(Self {
            name,
            min,
            max,
            step,
        })
    }

    /// Number of lattice points along this dimension, `(max - min)/step + 1`.
    pub fn level_count(&self) -> usize {
        let span = (self.max - self.min).to_f64_lossy();
        (span / self.step.to_f64_lossy()).round() as usize + 1
    }

    /// Physical value at a level index.
    pub fn value_at(&self, level: usize) -> F {
        self.min + F::from_usize(level).unwrap() * self.step
    }

    /// Snap a raw value onto its level index, rejecting off-lattice values.
    pub fn level_of(&self, value: F) -> Result<usize> {
        let rel = ((value - self.min) / self.step).to_f64_lossy();
        let level = rel.round();
        let tol = SNAP_TOL * self.max.to_f64_lossy().abs().max(1.0);
        if level < 0.0
            || level as usize >= self.level_count()
            || ((self.value_at(level as usize) - value).to_f64_lossy()).abs() > tol
        {
            return Err(Error::InvalidDimension {
                name: self.name.clone(),
                reason: format!("value {value} is not a lattice point"),
            });
        }
        Ok(level as usize)
    }
}

/// An ordered set of dimensions; the full lattice is their Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid<F> {
    dims: Vec<ParameterDim<F>>,
}

/// One recipe: per-dimension level indices, in-range by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub levels: Vec<usize>,
}

impl GridState {
    pub fn new(levels: Vec<usize>) -> Self {
        Self { levels }
    }
}

/// Per-dimension move in grid-step units: each delta is -1, 0 or +1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveAction {
    pub deltas: Vec<i8>,
}

impl MoveAction {
    pub fn new(deltas: Vec<i8>) -> Self {
        Self { deltas }
    }

    pub fn is_hold(&self) -> bool {
        self.deltas.iter().all(|&d| d == 0)
    }
}

/// Result of attempting a move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    InBounds(GridState),
    /// The move was rejected; carries the count of violating dimensions.
    OutOfBounds(usize),
}

/// Grid identity used to check persisted artifacts for compatibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFingerprint {
    pub dims: Vec<DimSpec>,
}

/// Plain-`f64` dimension record used in config files and fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl std::fmt::Display for GridFingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&serde_json::to_string(&self.dims).map_err(|_| std::fmt::Error)?)
    }
}

impl<F: Real> ParameterGrid<F> {
    pub fn new(dims: Vec<ParameterDim<F>>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidDimension {
                name: String::new(),
                reason: "grid needs at least one dimension".to_string(),
            });
        }
        Ok(Self { dims })
    }

    /// The grid used throughout the case study: water-content C (0..150 by
    /// 50), temperature T (0..100 by 10), pH (1..14 by 1) and time t
    /// (1..60 by 1).
    pub fn default_paper_grid() -> Self {
        Self::new(vec![
            ParameterDim::new("C", F::lit(0.0), F::lit(150.0), F::lit(50.0)).unwrap(),
            ParameterDim::new("T", F::lit(0.0), F::lit(100.0), F::lit(10.0)).unwrap(),
            ParameterDim::new("pH", F::lit(1.0), F::lit(14.0), F::lit(1.0)).unwrap(),
            ParameterDim::new("t", F::lit(1.0), F::lit(60.0), F::lit(1.0)).unwrap(),
        ])
        .unwrap()
    }

    pub fn dims(&self) -> &[ParameterDim<F>] {
        &self.dims
    }

    pub fn dim_count(&self) -> usize {
        self.dims.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.level_count()).collect()
    }

    pub fn state_count(&self) -> usize {
        self.dims.iter().map(|d| d.level_count()).product()
    }

    pub fn action_count(&self) -> usize {
        3usize.pow(self.dims.len() as u32)
    }

    fn check_state(&self, state: &GridState) -> Result<()> {
        if state.levels.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: state.levels.len(),
            });
        }
        for (dim, &level) in self.dims.iter().zip(&state.levels) {
            if level >= dim.level_count() {
                return Err(Error::InvalidState {
                    dim: dim.name.clone(),
                    level,
                    levels: dim.level_count(),
                });
            }
        }
        Ok(())
    }

    /// Mixed-radix state index, dimension 0 most significant.
    pub fn encode_state(&self, state: &GridState) -> Result<usize> {
        self.check_state(state)?;
        let mut idx = 0usize;
        for (dim, &level) in self.dims.iter().zip(&state.levels) {
            idx = idx * dim.level_count() + level;
        }
        Ok(idx)
    }

    pub fn decode_state(&self, mut index: usize) -> Result<GridState> {
        if index >= self.state_count() {
            return Err(Error::InvalidStateIndex {
                index,
                count: self.state_count(),
            });
        }
        let mut levels = vec![0usize; self.dims.len()];
        for (i, dim) in self.dims.iter().enumerate().rev() {
            let n = dim.level_count();
            levels[i] = index % n;
            index /= n;
        }
        Ok(GridState::new(levels))
    }

    /// Base-3 action index with digit `delta + 1`, dimension 0 most significant.
    pub fn encode_action(&self, action: &MoveAction) -> Result<usize> {
        if action.deltas.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: action.deltas.len(),
            });
        }
        let mut idx = 0usize;
        for (i, &delta) in action.deltas.iter().enumerate() {
            if !(-1..=1).contains(&delta) {
                return Err(Error::InvalidActionDelta {
                    dim: i,
                    delta: delta as i64,
                });
            }
            idx = idx * 3 + (delta + 1) as usize;
        }
        Ok(idx)
    }

    pub fn decode_action(&self, mut index: usize) -> Result<MoveAction> {
        if index >= self.action_count() {
            return Err(Error::InvalidActionIndex {
                index,
                count: self.action_count(),
            });
        }
        let mut deltas = vec![0i8; self.dims.len()];
        for slot in deltas.iter_mut().rev() {
            *slot = (index % 3) as i8 - 1;
            index /= 3;
        }
        Ok(MoveAction::new(deltas))
    }

    /// Attempt a move. The whole move is rejected if any dimension would
    /// leave its range; the result then carries the violation count.
    pub fn apply_action(&self, state: &GridState, action: &MoveAction) -> Result<Move> {
        self.check_state(state)?;
        if action.deltas.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: action.deltas.len(),
            });
        }
        let mut violations = 0usize;
        let mut next = Vec::with_capacity(self.dims.len());
        for ((dim, &level), &delta) in self.dims.iter().zip(&state.levels).zip(&action.deltas) {
            let moved = level as i64 + delta as i64;
            if moved < 0 || moved >= dim.level_count() as i64 {
                violations += 1;
            } else {
                next.push(moved as usize);
            }
        }
        if violations > 0 {
            Ok(Move::OutOfBounds(violations))
        } else {
            Ok(Move::InBounds(GridState::new(next)))
        }
    }

    /// Physical parameter values of a state.
    pub fn raw_values(&self, state: &GridState) -> Result<Vec<F>> {
        self.check_state(state)?;
        Ok(self
            .dims
            .iter()
            .zip(&state.levels)
            .map(|(d, &l)| d.value_at(l))
            .collect())
    }

    /// Snap raw parameter values onto a lattice state.
    pub fn state_from_raw(&self, values: &[F]) -> Result<GridState> {
        if values.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: values.len(),
            });
        }
        let levels = self
            .dims
            .iter()
            .zip(values)
            .map(|(d, &v)| d.level_of(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridState::new(levels))
    }

    pub fn fingerprint(&self) -> GridFingerprint {
        GridFingerprint {
            dims: self
                .dims
                .iter()
                .map(|d| DimSpec {
                    name: d.name.clone(),
                    min: d.min.to_f64_lossy(),
                    max: d.max.to_f64_lossy(),
                    step: d.step.to_f64_lossy(),
                })
                .collect(),
        }
    }

    pub fn from_specs(specs: &[DimSpec]) -> Result<Self> {
        let dims = specs
            .iter()
            .map(|s| {
                ParameterDim::new(
                    s.name.clone(),
                    F::lit(s.min),
                    F::lit(s.max),
                    F::lit(s.step),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims)
    }

    /// Load a grid from a JSON file: an ordered array of
    /// `{name, min, max, step}` objects.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let specs: Vec<DimSpec> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        Self::from_specs(&specs)
    }
}
