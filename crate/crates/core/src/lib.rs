//! Weighted compositional modeling and forecasting of life-table death
//! counts.
//!
//! Yearly death counts under a fixed radix are compositional: positive
//! and summing to a constant. This crate maps them onto an unconstrained
//! scale with a log-ratio transform around a geometrically weighted
//! geometric mean, decomposes the transformed series into weighted
//! principal components, forecasts component scores with a random walk
//! with drift, and maps forecasts back to valid life tables. On top of
//! the point pipeline it provides bootstrap prediction intervals,
//! divergence-based accuracy metrics with an expanding-window backtest
//! for selecting the weight parameter, and survival-probability and
//! annuity pricing utilities.
//!
//! The crate is organized along the pipeline:
//!
//! * [`lifetable`]: parsing, death-count derivation, Gini coefficient,
//!   life expectancy;
//! * [`weighting`]: geometrically decaying weights and parameter grids;
//! * [`clr`]: the log-ratio transform and its inverse;
//! * [`wfpca`]: weighted functional principal components;
//! * [`forecast`]: score forecasting and point forecast assembly;
//! * [`uncertainty`]: bootstrap ensembles and prediction bands;
//! * [`evaluation`]: divergences, coverage metrics, backtesting, and
//!   weight selection;
//! * [`annuity`]: survival probabilities and annuity quotes;
//! * [`fixtures`]: seeded synthetic surfaces for tests and demos.

pub mod annuity;
pub mod clr;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod forecast;
pub mod lifetable;
pub mod pipeline;
pub mod uncertainty;
pub mod weighting;
pub mod wfpca;

pub use annuity::{bond_price, price_annuity, price_annuity_interval, AnnuityQuote};
pub use clr::{clr_forward, clr_inverse, clr_inverse_raw, ClrDecomposition};
pub use error::{CodaError, Result};
pub use evaluation::{
    ecp_cpd, expanding_window_backtest, jsd, kld, select_kappa, BacktestPhase, BacktestPlan,
    ErrorReport, KappaSpec, MeanRule, MethodConfig, SelectionCriterion,
};
pub use forecast::{
    forecast_death_counts, forecast_log_curves, rwd_forecast, ForecastSet, ScoreForecast,
};
pub use lifetable::{
    derive_death_counts, gini_coefficient, life_expectancy_at_birth, parse_life_table,
    LifeTableSeries, MortalityInputs, ParseOptions, ParsedTable, Sex, TableFormat,
};
pub use pipeline::{fit_pipeline, PipelineFit};
pub use uncertainty::{
    bootstrap_paths, prediction_band, score_forecast_errors, BootstrapEnsemble, PredictionBand,
};
pub use weighting::{default_kappa_grid, kappa_grid, make_weights, WeightScheme};
pub use wfpca::{fit_wfpca, fit_wfpca_with_basis, select_k_evr, FpcaModel, KRule, ScoreBasis};
