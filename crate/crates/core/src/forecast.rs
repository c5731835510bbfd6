//! Score forecasting and assembly of point forecasts.
//!
//! Each component's score series is forecast independently with a random
//! walk with drift; the drift is the mean of first differences, which
//! telescopes to `(last - first) / (n - 1)`, so the forecast is linear in
//! the horizon and exact on linear score sequences. Forecast curves are
//! built from the extrapolated scores and the eigenfunctions, then mapped
//! back to death counts through the inverse log-ratio transform.

use nalgebra::{DMatrix, DVector};

use crate::clr::{clr_inverse, ClrDecomposition};
use crate::error::{CodaError, Result};
use crate::wfpca::FpcaModel;

/// Values on the log-ratio scale are clamped to this magnitude before
/// exponentiation to avoid overflow; clamping is counted and reported.
pub const BETA_CLAMP: f64 = 700.0;

/// Random-walk-with-drift forecast of a single score series.
#[derive(Debug, Clone, Copy)]
pub struct RwdForecast {
    pub horizon: usize,
    pub point: f64,
    pub drift: f64,
    /// Sample variance of the drift-adjusted first differences; a
    /// diagnostic, zero when fewer than three observations are available.
    pub sigma2: f64,
}

/// Forecast scores for every retained component at one horizon.
#[derive(Debug, Clone)]
pub struct ScoreForecast {
    pub horizon: usize,
    pub point: Vec<f64>,
    pub drift: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Point forecast curves for horizons `1..=h_max`.
#[derive(Debug, Clone)]
pub struct ForecastSet {
    curves: DMatrix<f64>, // horizons x ages
    radix: f64,
    clamped: usize,
}

impl ForecastSet {
    pub fn from_curves(curves: DMatrix<f64>, radix: f64) -> Self {
        Self {
            curves,
            radix,
            clamped: 0,
        }
    }

    pub fn horizons(&self) -> usize {
        self.curves.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.curves.ncols()
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    /// Number of log-scale values clamped before exponentiation.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn curves(&self) -> &DMatrix<f64> {
        &self.curves
    }

    /// The curve for horizon `h` (1-based).
    pub fn curve(&self, h: usize) -> Vec<f64> {
        self.curves.row(h - 1).iter().copied().collect()
    }
}

/// Forecasts one score series `h` steps ahead.
pub fn rwd_forecast(series: &[f64], horizon: usize) -> Result<RwdForecast> {
    let n = series.len();
    if n < 2 {
        return Err(CodaError::domain(format!(
            "random walk with drift needs at least 2 observations, got {n}"
        )));
    }
    if horizon == 0 {
        return Err(CodaError::domain("forecast horizon must be positive"));
    }
    let drift = (series[n - 1] - series[0]) / (n - 1) as f64;
    let point = series[n - 1] + horizon as f64 * drift;
    let innovations: Vec<f64> = series.windows(2).map(|w| w[1] - w[0] - drift).collect();
    let dof = innovations.len().saturating_sub(1).max(1) as f64;
    let sigma2 = innovations.iter().map(|e| e * e).sum::<f64>() / dof;
    Ok(RwdForecast {
        horizon,
        point,
        drift,
        sigma2,
    })
}

/// Forecasts every component's scores at one horizon.
pub fn forecast_scores(model: &FpcaModel, horizon: usize) -> Result<ScoreForecast> {
    let mut point = Vec::with_capacity(model.k());
    let mut drift = Vec::with_capacity(model.k());
    let mut sigma2 = Vec::with_capacity(model.k());
    for k in 0..model.k() {
        let series = model.score_series(k);
        let fc = rwd_forecast(&series, horizon)?;
        point.push(fc.point);
        drift.push(fc.drift);
        sigma2.push(fc.sigma2);
    }
    Ok(ScoreForecast {
        horizon,
        point,
        drift,
        sigma2,
    })
}

/// Builds the log-ratio-scale curve for a set of component scores,
/// clamping extreme values and counting how many were clamped.
pub(crate) fn curve_from_scores(
    scores: &[f64],
    model: &FpcaModel,
    n_ages: usize,
    clamped: &mut usize,
) -> DVector<f64> {
    let mut beta_hat = DVector::<f64>::zeros(n_ages);
    for (k, &score) in scores.iter().enumerate() {
        for i in 0..n_ages {
            beta_hat[i] += score * model.eigenfunctions()[(k, i)];
        }
    }
    for i in 0..n_ages {
        if beta_hat[i].abs() > BETA_CLAMP {
            beta_hat[i] = beta_hat[i].clamp(-BETA_CLAMP, BETA_CLAMP);
            *clamped += 1;
        }
    }
    beta_hat
}

/// Forecast curves on the log-ratio scale for horizons `1..=h_max`,
/// together with the number of clamped values.
pub fn forecast_log_curves(
    model: &FpcaModel,
    h_max: usize,
    n_ages: usize,
) -> Result<(DMatrix<f64>, usize)> {
    if h_max == 0 {
        return Err(CodaError::domain("horizon count must be at least 1"));
    }
    let mut curves = DMatrix::zeros(h_max, n_ages);
    let mut clamped = 0usize;
    for h in 1..=h_max {
        let beta_hat = if model.k() == 0 {
            DVector::zeros(n_ages)
        } else {
            let scores = forecast_scores(model, h)?;
            curve_from_scores(&scores.point, model, n_ages, &mut clamped)
        };
        curves.row_mut(h - 1).copy_from(&beta_hat.transpose());
    }
    Ok((curves, clamped))
}

/// Point forecasts of death counts for horizons `1..=h_max`.
///
/// Every returned curve is strictly positive and closed to the radix. A
/// model with zero components forecasts the closed mean curve at every
/// horizon.
pub fn forecast_death_counts(
    model: &FpcaModel,
    decomp: &ClrDecomposition,
    h_max: usize,
) -> Result<ForecastSet> {
    if model.n_ages() != decomp.n_ages() {
        return Err(CodaError::domain(format!(
            "model covers {} ages but the transform covers {}",
            model.n_ages(),
            decomp.n_ages()
        )));
    }
    let n_ages = decomp.n_ages();
    let (log_curves, clamped) = forecast_log_curves(model, h_max, n_ages)?;
    let mut curves = DMatrix::zeros(h_max, n_ages);
    for h in 1..=h_max {
        let beta_hat = log_curves.row(h - 1).transpose();
        let curve = clr_inverse(&beta_hat, decomp.alpha(), decomp.radix())?;
        curves.row_mut(h - 1).copy_from(&curve.transpose());
    }
    Ok(ForecastSet {
        curves,
        radix: decomp.radix(),
        clamped,
    })
}
