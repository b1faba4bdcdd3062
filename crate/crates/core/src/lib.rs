//! Decision-support engine for discrete process-recipe optimization.
//!
//! A recipe (water-content, temperature, pH, treatment time) lives on a
//! discretized parameter lattice. A tabular Q-learning agent walks the
//! lattice one grid step at a time, rewarded by the decrease of the
//! distance between predicted and targeted color properties. A brute-force
//! oracle over the full lattice provides ground truth, plus random-search
//! and hill-climbing baselines.
//!
//! The numeric core is generic over the scalar type (see [`scalar::Real`]);
//! the aliases below pin the concrete types the CLI and file formats use.

pub mod cli;
pub mod env;
pub mod error;
pub mod grid;
pub mod learner;
pub mod oracle;
pub mod predictor;
pub mod scalar;

pub use env::{Environment, StepOutcome};
pub use error::{Error, Result};
pub use grid::{GridFingerprint, GridState, Move, MoveAction, ParameterDim, ParameterGrid};
pub use learner::{Hyperparameters, QTable, TrainingReport};
pub use oracle::{OracleResult, SamplingMode};
pub use predictor::{ColorQuad, ObjectiveSpec, PredictorSource};
pub use scalar::Real;

/// Default (`f64`) concrete types.
pub type Grid64 = grid::ParameterGrid<f64>;
pub type Dim64 = grid::ParameterDim<f64>;
pub type ColorQuad64 = predictor::ColorQuad<f64>;
pub type ObjectiveSpec64 = predictor::ObjectiveSpec<f64>;
pub type PredictorSource64 = predictor::PredictorSource<f64>;
pub type QTable64 = learner::QTable<f64>;
pub type Hyperparameters64 = learner::Hyperparameters<f64>;

/// Single-precision variants.
pub type Grid32 = grid::ParameterGrid<f32>;
pub type Dim32 = grid::ParameterDim<f32>;
pub type ColorQuad32 = predictor::ColorQuad<f32>;
pub type ObjectiveSpec32 = predictor::ObjectiveSpec<f32>;
pub type PredictorSource32 = predictor::PredictorSource<f32>;
pub type QTable32 = learner::QTable<f32>;
pub type Hyperparameters32 = learner::Hyperparameters<f32>;
