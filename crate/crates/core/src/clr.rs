//! Log-ratio transform between death counts and an unconstrained scale.
//!
//! The forward map removes a weighted geometric mean over time: with
//! weights `w_t`, the mean curve is `alpha(u) = exp(sum_t w_t ln d_t(u))`
//! and the transformed series is `beta_t(u) = ln d_t(u) - ln alpha(u)`.
//! Centering is over time, not over ages, so the weighted time-average of
//! `beta` is identically zero. The inverse map exponentiates, multiplies
//! the mean back in, and closes each curve to the radix so the result is
//! a valid life table.

use nalgebra::{DMatrix, DVector};

use crate::error::{CodaError, Result};
use crate::lifetable::LifeTableSeries;
use crate::weighting::WeightScheme;

/// A weighted geometric mean curve and the centered log-scale series.
#[derive(Debug, Clone)]
pub struct ClrDecomposition {
    alpha: DVector<f64>,
    beta: DMatrix<f64>,
    scheme: WeightScheme,
    radix: f64,
}

impl ClrDecomposition {
    /// Assembles a decomposition from explicit parts.
    ///
    /// Useful for synthetic setups; the caller is responsible for the
    /// weighted-centering property of `beta`.
    pub fn from_parts(
        alpha: DVector<f64>,
        beta: DMatrix<f64>,
        scheme: WeightScheme,
        radix: f64,
    ) -> Result<Self> {
        if scheme.len() != beta.nrows() {
            return Err(CodaError::domain(format!(
                "weight vector length {} does not match {} rows",
                scheme.len(),
                beta.nrows()
            )));
        }
        if alpha.len() != beta.ncols() {
            return Err(CodaError::domain(format!(
                "mean length {} does not match {} ages",
                alpha.len(),
                beta.ncols()
            )));
        }
        if alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(CodaError::domain("mean curve must be strictly positive"));
        }
        Ok(Self {
            alpha,
            beta,
            scheme,
            radix,
        })
    }

    /// The weighted geometric mean over age, strictly positive.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Centered log-ratio values, years by ages.
    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    pub fn n_years(&self) -> usize {
        self.beta.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.beta.ncols()
    }
}

/// Maps a death-count series onto the unconstrained log-ratio scale.
pub fn clr_forward(series: &LifeTableSeries, scheme: &WeightScheme) -> Result<ClrDecomposition> {
    let counts = series.counts();
    for t in 0..counts.nrows() {
        for i in 0..counts.ncols() {
            if !(counts[(t, i)] > 0.0) {
                return Err(CodaError::domain(format!(
                    "count must be positive at year {}, age {}",
                    series.years()[t],
                    series.ages()[i]
                )));
            }
        }
    }
    let (alpha, beta) = clr_transform(counts, scheme)?;
    Ok(ClrDecomposition {
        alpha,
        beta,
        scheme: scheme.clone(),
        radix: series.radix(),
    })
}

/// Matrix-level forward transform: returns the weighted geometric mean
/// over rows and the centered log values.
pub fn clr_transform(
    counts: &DMatrix<f64>,
    scheme: &WeightScheme,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = counts.nrows();
    if scheme.len() != n {
        return Err(CodaError::domain(format!(
            "weight vector length {} does not match {} rows",
            scheme.len(),
            n
        )));
    }
    for t in 0..n {
        for i in 0..counts.ncols() {
            if !(counts[(t, i)] > 0.0) {
                return Err(CodaError::domain(format!(
                    "count must be positive at row {t}, age {i}"
                )));
            }
        }
    }

    let log_counts = counts.map(|c| c.ln());
    let weights = scheme.weights();
    let mut mean_log = DVector::<f64>::zeros(counts.ncols());
    for t in 0..n {
        for i in 0..counts.ncols() {
            mean_log[i] += weights[t] * log_counts[(t, i)];
        }
    }
    let mut beta = log_counts;
    for t in 0..n {
        for i in 0..beta.ncols() {
            beta[(t, i)] -= mean_log[i];
        }
    }
    Ok((mean_log.map(|m| m.exp()), beta))
}

/// Inverse transform of one curve, closed to the radix.
pub fn clr_inverse(beta_hat: &DVector<f64>, alpha: &DVector<f64>, radix: f64) -> Result<DVector<f64>> {
    let mut curve = clr_inverse_raw(beta_hat, alpha)?;
    let total = curve.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(CodaError::domain(format!(
            "inverse transform produced an unnormalizable curve (sum {total})"
        )));
    }
    curve *= radix / total;
    Ok(curve)
}

/// Inverse transform without the closing step, for bit-level comparison
/// against implementations that skip it.
pub fn clr_inverse_raw(beta_hat: &DVector<f64>, alpha: &DVector<f64>) -> Result<DVector<f64>> {
    if beta_hat.len() != alpha.len() {
        return Err(CodaError::domain(format!(
            "curve length {} does not match mean length {}",
            beta_hat.len(),
            alpha.len()
        )));
    }
    let mut curve = DVector::zeros(beta_hat.len());
    for i in 0..beta_hat.len() {
        let value = beta_hat[i].exp() * alpha[i];
        if !value.is_finite() {
            return Err(CodaError::domain(format!(
                "exponential overflow at age {i} (value {})",
                beta_hat[i]
            )));
        }
        curve[i] = value;
    }
    Ok(curve)
}
