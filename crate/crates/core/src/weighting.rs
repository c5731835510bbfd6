//! Geometrically decaying observation weights.
//!
//! A weight scheme assigns weight `kappa * (1 - kappa)^(n - t)` to year
//! `t` of an `n`-year series and renormalizes so the weights sum to one.
//! `kappa = 0` is defined as the uniform (unweighted) scheme and
//! `kappa = 1` puts all mass on the most recent year, so a single code
//! path serves both the weighted and the standard method.

use crate::error::{CodaError, Result};
use serde::{Deserialize, Serialize};

/// A decay parameter together with its normalized weight vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightScheme {
    kappa: f64,
    weights: Vec<f64>,
}

impl WeightScheme {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Weights ordered oldest to newest; they sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Builds the normalized weight vector for a series of length `n`.
///
/// Raw weights follow the geometric decay above; because their finite sum
/// is `1 - (1 - kappa)^n` rather than exactly one, the vector is divided
/// by its actual sum so the unit-sum invariant holds for every `n`.
pub fn make_weights(kappa: f64, n: usize) -> Result<WeightScheme> {
    if !(0.0..=1.0).contains(&kappa) || kappa.is_nan() {
        return Err(CodaError::domain(format!(
            "weight parameter must lie in [0, 1], got {kappa}"
        )));
    }
    if n == 0 {
        return Err(CodaError::domain("weight vector length must be positive"));
    }

    let weights = if kappa == 0.0 {
        vec![1.0 / n as f64; n]
    } else {
        let raw: Vec<f64> = (1..=n)
            .map(|t| kappa * (1.0 - kappa).powi((n - t) as i32))
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / sum).collect()
    };

    Ok(WeightScheme { kappa, weights })
}

/// Inclusive arithmetic grid of candidate decay parameters.
pub fn kappa_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(CodaError::domain(format!(
            "grid bounds must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]"
        )));
    }
    if !(step > 0.0) {
        return Err(CodaError::domain(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| (lo + i as f64 * step).min(hi)).collect();
    if grid.is_empty() {
        return Err(CodaError::domain("empty grid"));
    }
    Ok(grid)
}

/// Default search grid: 0 to 0.3 in steps of 0.001.
pub fn default_kappa_grid() -> Vec<f64> {
    kappa_grid(0.0, 0.3, 0.001).expect("default grid is valid")
}
