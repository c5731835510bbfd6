//! Convenience wrapper chaining transform, decomposition, and forecasting.

use crate::clr::{clr_forward, ClrDecomposition};
use crate::error::Result;
use crate::forecast::{forecast_death_counts, ForecastSet};
use crate::lifetable::LifeTableSeries;
use crate::uncertainty::{bootstrap_paths, BootstrapEnsemble};
use crate::weighting::make_weights;
use crate::wfpca::{fit_wfpca_with_basis, FpcaModel, KRule, ScoreBasis};

/// A fitted transform and component model for one training window.
#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub decomp: ClrDecomposition,
    pub model: FpcaModel,
}

/// Fits the full pipeline on a series with the given decay parameter.
pub fn fit_pipeline(
    series: &LifeTableSeries,
    kappa: f64,
    k_rule: KRule,
    basis: ScoreBasis,
) -> Result<PipelineFit> {
    let scheme = make_weights(kappa, series.n_years())?;
    let decomp = clr_forward(series, &scheme)?;
    let model = fit_wfpca_with_basis(&decomp, k_rule, basis)?;
    Ok(PipelineFit { decomp, model })
}

impl PipelineFit {
    /// Point forecasts for horizons `1..=h_max`.
    pub fn forecast(&self, h_max: usize) -> Result<ForecastSet> {
        forecast_death_counts(&self.model, &self.decomp, h_max)
    }

    /// Bootstrap future paths for horizons `1..=h_max`.
    pub fn bootstrap(&self, h_max: usize, replicates: usize, seed: u64) -> Result<BootstrapEnsemble> {
        bootstrap_paths(&self.model, &self.decomp, h_max, replicates, seed)
    }
}
