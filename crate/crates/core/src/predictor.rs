//! Recipe-to-color prediction and the objective function.
//!
//! The trained model the workflow expects is a black box mapping a recipe
//! (C, T, pH, t) to predicted color properties (k/s, L, a, b). Two sources
//! are provided: an exactly specified analytic reference surrogate, and a
//! table of externally supplied predictions covering every grid state.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridState, ParameterGrid};
use crate::scalar::Real;

/// A (k/s, L, a, b) color-property quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorQuad<F> {
    pub ks: F,
    pub l: F,
    pub a: F,
    pub b: F,
}

impl<F: Real> ColorQuad<F> {
    pub fn new(ks: F, l: F, a: F, b: F) -> Self {
        Self { ks, l, a, b }
    }

    pub fn components(&self) -> [F; 4] {
        [self.ks, self.l, self.a, self.b]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }
}

/// Target color plus optional per-component weights (default all 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec<F> {
    pub target: ColorQuad<F>,
    pub weights: [F; 4],
}

impl<F: Real> ObjectiveSpec<F> {
    pub fn new(target: ColorQuad<F>) -> Self {
        Self {
            target,
            weights: [F::one(); 4],
        }
    }

    pub fn with_weights(target: ColorQuad<F>, weights: [F; 4]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < F::zero()) {
            return Err(Error::InvalidHyperparameter {
                name: "weights",
                value: format!("{weights:?}"),
                range: "finite and non-negative",
            });
        }
        Ok(Self { target, weights })
    }
}

/// Where predictions come from.
#[derive(Debug, Clone)]
pub enum PredictorSource<F> {
    /// The built-in analytic surrogate (4-dimensional grids only).
    Reference,
    /// Per-state predictions, indexed by state index; total over the grid.
    Table(Vec<ColorQuad<F>>),
}

/// Original color of the untreated fabric; the surrogate's zero-fading anchor.
pub fn original_color<F: Real>() -> ColorQuad<F> {
    ColorQuad::new(F::lit(22.676), F::lit(64.97), F::lit(42.08), F::lit(88.04))
}

/// Fading depth of the reference surrogate, in (0, 1) over the default grid.
///
/// With normalized inputs c = C/150, tau = T/100, p = (pH-1)/13, theta = t/60:
/// D = (1 - e^(-2.5 theta)) (0.2 + 0.8 tau) e^(-3 (c - 0.65)^2)
///     (0.6 + 0.4 e^(-5 (p - 0.55)^2))
pub fn fading_depth<F: Real>(raw: &[F]) -> Result<F> {
    if raw.len() != 4 {
        return Err(Error::SurrogateArity { got: raw.len() });
    }
    let c = raw[0] / F::lit(150.0);
    let tau = raw[1] / F::lit(100.0);
    let p = (raw[2] - F::one()) / F::lit(13.0);
    let theta = raw[3] / F::lit(60.0);

    let time_term = F::one() - (-F::lit(2.5) * theta).exp();
    let temp_term = F::lit(0.2) + F::lit(0.8) * tau;
    let dc = c - F::lit(0.65);
    let water_term = (-F::lit(3.0) * dc * dc).exp();
    let dp = p - F::lit(0.55);
    let ph_term = F::lit(0.6) + F::lit(0.4) * (-F::lit(5.0) * dp * dp).exp();
    Ok(time_term * temp_term * water_term * ph_term)
}

/// Reference-surrogate prediction for raw (C, T, pH, t) values.
///
/// Anchored so that zero fading returns the original color exactly.
pub fn reference_prediction<F: Real>(raw: &[F]) -> Result<ColorQuad<F>> {
    let d = fading_depth(raw)?;
    Ok(ColorQuad::new(
        F::lit(22.676) * (F::one() - F::lit(0.95) * d),
        F::lit(64.97) - F::lit(48.0) * d,
        F::lit(42.08) - F::lit(21.0) * d,
        F::lit(88.04) - F::lit(17.0) * d,
    ))
}

/// Predict the color properties of a grid state.
pub fn predict<F: Real>(
    grid: &ParameterGrid<F>,
    source: &PredictorSource<F>,
    state: &GridState,
) -> Result<ColorQuad<F>> {
    match source {
        PredictorSource::Reference => {
            let raw = grid.raw_values(state)?;
            reference_prediction(&raw)
        }
        PredictorSource::Table(rows) => {
            let idx = grid.encode_state(state)?;
            rows.get(idx).copied().ok_or_else(|| Error::TableMiss {
                state: format!("{:?}", state.levels),
            })
        }
    }
}

/// Weighted Euclidean distance between a prediction and the target.
pub fn objective<F: Real>(spec: &ObjectiveSpec<F>, predicted: &ColorQuad<F>) -> F {
    let p = predicted.components();
    let t = spec.target.components();
    let sum: F = (0..4)
        .map(|i| {
            let d = p[i] - t[i];
            spec.weights[i] * d * d
        })
        .sum();
    sum.sqrt()
}

/// The objective value `f(state)` used as the environment's reward signal.
pub fn evaluate<F: Real>(
    grid: &ParameterGrid<F>,
    source: &PredictorSource<F>,
    spec: &ObjectiveSpec<F>,
    state: &GridState,
) -> Result<F> {
    Ok(objective(spec, &predict(grid, source, state)?))
}

/// Outcome of loading a prediction table from disk.
pub struct TableLoad<F> {
    pub source: PredictorSource<F>,
    /// Number of rows that overwrote an earlier row for the same state.
    pub duplicates: usize,
}

/// Load a CSV prediction table (`C,T,pH,t,ks,L,a,b`, raw parameter values).
///
/// Coverage is validated at load time: every grid state must have a row.
/// Duplicate rows for a state are allowed; the last one wins and the
/// duplicate count is reported.
pub fn load_table<F: Real>(path: impl AsRef<Path>, grid: &ParameterGrid<F>) -> Result<TableLoad<F>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.display().to_string(),
        line,
        reason,
    };

    let n = grid.dim_count();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".to_string()))?;
    let expected_header = expected_table_header(grid);
    if header.trim() != expected_header {
        return Err(parse_err(
            1,
            format!("expected header `{expected_header}`, got `{}`", header.trim()),
        ));
    }

    let mut rows: Vec<Option<ColorQuad<F>>> = vec![None; grid.state_count()];
    let mut duplicates = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 4 {
            return Err(parse_err(
                lineno,
                format!("expected {} fields, got {}", n + 4, fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(n + 4);
        for field in &fields {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad number `{field}`: {e}")))?;
            values.push(F::lit(v));
        }
        let state = grid
            .state_from_raw(&values[..n])
            .map_err(|e| parse_err(lineno, e.to_string()))?;
        let idx = grid.encode_state(&state).expect("state valid by construction");
        let quad = ColorQuad::new(values[n], values[n + 1], values[n + 2], values[n + 3]);
        if !quad.is_finite() {
            return Err(parse_err(lineno, "non-finite color value".to_string()));
        }
        if rows[idx].replace(quad).is_some() {
            duplicates += 1;
        }
    }

    let missing = rows.iter().filter(|r| r.is_none()).count();
    if missing > 0 {
        let first = rows.iter().position(|r| r.is_none()).unwrap();
        let state = grid.decode_state(first).unwrap();
        let raw = grid.raw_values(&state).unwrap();
        return Err(Error::IncompleteTable {
            missing,
            total: grid.state_count(),
            first: format!("{raw:?}"),
        });
    }

    Ok(TableLoad {
        source: PredictorSource::Table(rows.into_iter().map(Option::unwrap).collect()),
        duplicates,
    })
}

/// Write a predictor's outputs for every grid state as a CSV table.
pub fn save_table<F: Real>(
    path: impl AsRef<Path>,
    grid: &ParameterGrid<F>,
    source: &PredictorSource<F>,
) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{}", expected_table_header(grid))?;
    for idx in 0..grid.state_count() {
        let state = grid.decode_state(idx)?;
        let raw = grid.raw_values(&state)?;
        let quad = predict(grid, source, &state)?;
        let mut fields: Vec<String> = raw.iter().map(|v| v.to_string()).collect();
        fields.extend(quad.components().iter().map(|v| v.to_string()));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

fn expected_table_header<F: Real>(grid: &ParameterGrid<F>) -> String {
    let mut cols: Vec<String> = grid.dims().iter().map(|d| d.name.clone()).collect();
    cols.extend(["ks", "L", "a", "b"].map(String::from));
    cols.join(",")
}
