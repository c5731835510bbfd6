//! Bootstrap future sample paths and pointwise prediction bands.
//!
//! Two error sources are resampled: in-sample score forecast errors (per
//! component, per horizon) and whole model-residual curves, the latter
//! drawn as complete functions so cross-age dependence is preserved.
//! Replicate `b` draws from stream `b` of a counter-based generator seeded
//! once, so results are reproducible and independent of how replicates are
//! scheduled across threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clr::{clr_inverse, ClrDecomposition};
use crate::error::{CodaError, Result};
use crate::forecast::{curve_from_scores, forecast_scores, rwd_forecast};
use crate::wfpca::FpcaModel;

/// Bootstrapped future death-count paths.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    paths: Vec<DMatrix<f64>>, // B matrices, horizons x ages
    radix: f64,
    seed: u64,
}

impl BootstrapEnsemble {
    pub fn replicates(&self) -> usize {
        self.paths.len()
    }

    pub fn horizons(&self) -> usize {
        self.paths[0].nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.paths[0].ncols()
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self, b: usize) -> &DMatrix<f64> {
        &self.paths[b]
    }

    /// All replicate values at one (horizon, age) cell; `h` is 1-based.
    pub fn cell_values(&self, h: usize, age: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[(h - 1, age)]).collect()
    }
}

/// Pointwise lower and upper quantile curves per horizon.
#[derive(Debug, Clone)]
pub struct PredictionBand {
    nu: f64,
    lower: DMatrix<f64>,
    upper: DMatrix<f64>,
}

impl PredictionBand {
    /// Builds a band from explicit quantile curves.
    pub fn from_curves(nu: f64, lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        if !(0.0 < nu && nu < 1.0) {
            return Err(CodaError::domain(format!(
                "significance level must lie in (0, 1), got {nu}"
            )));
        }
        if lower.shape() != upper.shape() {
            return Err(CodaError::domain("band curves must share a shape"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(CodaError::domain("lower band exceeds upper band"));
        }
        Ok(Self { nu, lower, upper })
    }

    /// Significance level; the band covers `1 - nu` nominally.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn horizons(&self) -> usize {
        self.lower.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.lower.ncols()
    }
}

/// In-sample `h`-step forecast errors of one score series.
///
/// The drift is estimated once on the full series and the fitted `h`-step
/// forecast of observation `t` is `series[t - h] + h * drift`, so the
/// error sample has one entry per target index `t` in `h+1..=n` (that is,
/// `n - h` errors) and is exactly zero on linear sequences.
pub fn score_forecast_errors(series: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if horizon == 0 {
        return Err(CodaError::domain("horizon must be positive"));
    }
    if n <= horizon + 1 {
        return Err(CodaError::domain(format!(
            "series of length {n} is too short for {horizon}-step errors; \
             need at least {}",
            horizon + 2
        )));
    }
    let drift = rwd_forecast(series, horizon)?.drift;
    let mut errors = Vec::with_capacity(n - horizon);
    for t in (horizon + 1)..=n {
        let fitted = series[t - horizon - 1] + horizon as f64 * drift;
        errors.push(series[t - 1] - fitted);
    }
    Ok(errors)
}

/// Generates `b` bootstrap future paths for horizons `1..=h_max`.
///
/// For each replicate and horizon, one error is drawn with replacement
/// per component and added to the point score forecast, one residual
/// curve is drawn with replacement, and the resulting log-scale curve is
/// inverted and closed to the radix. Identical inputs and seed give
/// identical ensembles regardless of thread count.
pub fn bootstrap_paths(
    model: &FpcaModel,
    decomp: &ClrDecomposition,
    h_max: usize,
    b: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    if h_max == 0 {
        return Err(CodaError::domain("horizon count must be at least 1"));
    }
    if b == 0 {
        return Err(CodaError::domain("replicate count must be at least 1"));
    }
    let n_ages = decomp.n_ages();
    let n = model.n_years();

    // Error samples per horizon and component, computed once.
    let mut error_samples: Vec<Vec<Vec<f64>>> = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        let mut per_component = Vec::with_capacity(model.k());
        for k in 0..model.k() {
            let series = model.score_series(k);
            let errors = score_forecast_errors(&series, h).map_err(|_| {
                CodaError::domain(format!(
                    "no {h}-step forecast errors available from {n} years; \
                     shorten the horizon or supply a longer series"
                ))
            })?;
            per_component.push(errors);
        }
        error_samples.push(per_component);
    }

    let mut point_scores: Vec<Vec<f64>> = Vec::with_capacity(h_max);
    for h in 1..=h_max {
        if model.k() == 0 {
            point_scores.push(Vec::new());
        } else {
            point_scores.push(forecast_scores(model, h)?.point);
        }
    }

    let paths: Result<Vec<DMatrix<f64>>> = (0..b)
        .into_par_iter()
        .map(|replicate| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(replicate as u64);
            let mut path = DMatrix::zeros(h_max, n_ages);
            for h in 1..=h_max {
                let mut scores = point_scores[h - 1].clone();
                for (k, score) in scores.iter_mut().enumerate() {
                    let sample = &error_samples[h - 1][k];
                    *score += sample[rng.random_range(0..sample.len())];
                }
                let residual_row = rng.random_range(0..n);
                let mut clamped = 0usize;
                let mut beta_hat = curve_from_scores(&scores, model, n_ages, &mut clamped);
                for i in 0..n_ages {
                    beta_hat[i] += model.residuals()[(residual_row, i)];
                }
                let curve = clr_inverse(&beta_hat, decomp.alpha(), decomp.radix())?;
                path.row_mut(h - 1).copy_from(&curve.transpose());
            }
            Ok(path)
        })
        .collect();

    Ok(BootstrapEnsemble {
        paths: paths?,
        radix: decomp.radix(),
        seed,
    })
}

/// Empirical quantile with linear interpolation between order statistics:
/// for a sorted sample `x_1..x_m` and probability `p`, the result is
/// `x_{j} + g (x_{j+1} - x_{j})` where `j + g = 1 + (m - 1) p`.
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    debug_assert!(m > 0);
    if m == 1 {
        return sorted[0];
    }
    let position = (m - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = position.floor() as usize;
    let frac = position - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Pointwise band at significance `nu`: per horizon and age, the
/// `nu/2` and `1 - nu/2` empirical quantiles across replicates.
pub fn prediction_band(ensemble: &BootstrapEnsemble, nu: f64) -> Result<PredictionBand> {
    if !(0.0 < nu && nu < 1.0) {
        return Err(CodaError::domain(format!(
            "significance level must lie in (0, 1), got {nu}"
        )));
    }
    if ensemble.replicates() < 2 {
        return Err(CodaError::domain(
            "need at least 2 replicates to form a band",
        ));
    }
    let h_max = ensemble.horizons();
    let n_ages = ensemble.n_ages();
    let mut lower = DMatrix::zeros(h_max, n_ages);
    let mut upper = DMatrix::zeros(h_max, n_ages);
    for h in 1..=h_max {
        for age in 0..n_ages {
            let mut values = ensemble.cell_values(h, age);
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite path values"));
            lower[(h - 1, age)] = quantile_linear(&values, nu / 2.0);
            upper[(h - 1, age)] = quantile_linear(&values, 1.0 - nu / 2.0);
        }
    }
    Ok(PredictionBand { nu, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clr::clr_forward;
    use crate::lifetable::{LifeTableSeries, Sex};
    use crate::weighting::make_weights;
    use crate::wfpca::{fit_wfpca, KRule};
    use approx::assert_relative_eq;

    #[test]
    fn linear_scores_have_zero_errors() {
        let series: Vec<f64> = (0..10).map(|t| 3.0 + 0.5 * t as f64).collect();
        for h in 1..=8 {
            let errors = score_forecast_errors(&series, h).unwrap();
            assert_eq!(errors.len(), 10 - h);
            assert!(errors.iter().all(|e| e.abs() < 1e-12), "h={h}: {errors:?}");
        }
    }

    #[test]
    fn constant_scores_have_zero_errors() {
        let series = vec![4.2; 7];
        let errors = score_forecast_errors(&series, 2).unwrap();
        assert!(errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn error_count_is_n_minus_h() {
        let series: Vec<f64> = (0..6).map(|t| (t as f64).sin()).collect();
        let h = series.len() - 2;
        let errors = score_forecast_errors(&series, h).unwrap();
        assert_eq!(errors.len(), 2);
    }

    #[test]
    fn too_short_series_rejected() {
        let series = vec![1.0, 2.0, 3.0];
        assert!(score_forecast_errors(&series, 2).is_err());
        assert!(score_forecast_errors(&series, 1).is_ok());
    }

    fn toy_inputs() -> (FpcaModel, ClrDecomposition) {
        let counts = DMatrix::from_fn(12, 6, |t, i| {
            30.0 + 1.5 * t as f64 + ((i * 17 + t * 7) % 13) as f64
        });
        let years: Vec<i32> = (0..12).map(|t| 2000 + t).collect();
        let ages: Vec<u32> = (0..6).collect();
        let series =
            LifeTableSeries::from_raw_counts(years, ages, counts, 400.0, Sex::Total).unwrap();
        let scheme = make_weights(0.05, 12).unwrap();
        let decomp = clr_forward(&series, &scheme).unwrap();
        let model = fit_wfpca(&decomp, KRule::Fixed(2)).unwrap();
        (model, decomp)
    }

    #[test]
    fn same_seed_gives_identical_ensembles() {
        let (model, decomp) = toy_inputs();
        let a = bootstrap_paths(&model, &decomp, 3, 20, 99).unwrap();
        let b = bootstrap_paths(&model, &decomp, 3, 20, 99).unwrap();
        for r in 0..20 {
            assert_eq!(a.path(r), b.path(r));
        }
        let c = bootstrap_paths(&model, &decomp, 3, 20, 100).unwrap();
        assert!((0..20).any(|r| a.path(r) != c.path(r)));
    }

    #[test]
    fn degenerate_model_collapses_to_point_forecast() {
        // exact rank-1 surface with linear scores: zero residuals and
        // zero in-sample errors, so every path equals the point forecast
        let n = 8;
        let n_ages = 4;
        let phi = [0.5, -0.5, 0.5, -0.5];
        let beta = DMatrix::from_fn(n, n_ages, |t, i| {
            0.3 * (t as f64 - (n as f64 - 1.0) / 2.0) * phi[i]
        });
        let alpha = nalgebra::DVector::from_element(n_ages, 25.0);
        let scheme = make_weights(0.0, n).unwrap();
        let decomp = ClrDecomposition::from_parts(alpha, beta, scheme, 100.0).unwrap();
        let model = crate::wfpca::fit_wfpca_with_basis(
            &decomp,
            KRule::Fixed(1),
            crate::wfpca::ScoreBasis::Unweighted,
        )
        .unwrap();
        let ensemble = bootstrap_paths(&model, &decomp, 2, 15, 7).unwrap();
        let point = crate::forecast::forecast_death_counts(&model, &decomp, 2).unwrap();
        for r in 0..15 {
            for h in 1..=2 {
                for i in 0..n_ages {
                    assert_relative_eq!(
                        ensemble.path(r)[(h - 1, i)],
                        point.curve(h)[i],
                        max_relative = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn paths_are_valid_compositions() {
        let (model, decomp) = toy_inputs();
        let ensemble = bootstrap_paths(&model, &decomp, 4, 50, 1234).unwrap();
        for r in 0..50 {
            for h in 0..4 {
                let row = ensemble.path(r).row(h);
                assert!(row.iter().all(|&c| c > 0.0));
                let total: f64 = row.iter().sum();
                assert_relative_eq!(total, 400.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn horizon_beyond_error_supply_is_rejected() {
        let (model, decomp) = toy_inputs();
        // 12 years: h-step errors need n >= h + 2, so h = 11 must fail
        let err = bootstrap_paths(&model, &decomp, 11, 5, 1).unwrap_err();
        assert!(err.to_string().contains("shorten the horizon"));
    }

    #[test]
    fn quantile_rule_matches_order_statistics() {
        let values: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        assert_relative_eq!(quantile_linear(&values, 0.1), 1.9, max_relative = 1e-12);
        assert_relative_eq!(quantile_linear(&values, 0.9), 9.1, max_relative = 1e-12);
        assert_relative_eq!(quantile_linear(&values, 0.0), 1.0);
        assert_relative_eq!(quantile_linear(&values, 1.0), 10.0);
        assert_relative_eq!(quantile_linear(&values, 0.5), 5.5);
    }

    #[test]
    fn identical_paths_give_zero_width_band() {
        let (model, decomp) = toy_inputs();
        let ensemble = bootstrap_paths(&model, &decomp, 2, 1, 5).unwrap();
        // duplicate the single path to build a degenerate ensemble
        let cloned = BootstrapEnsemble {
            paths: vec![ensemble.path(0).clone(); 10],
            radix: ensemble.radix(),
            seed: 5,
        };
        let band = prediction_band(&cloned, 0.2).unwrap();
        for h in 0..2 {
            for i in 0..decomp.n_ages() {
                assert_eq!(band.lower()[(h, i)], band.upper()[(h, i)]);
            }
        }
    }

    #[test]
    fn bands_nest_across_levels() {
        let (model, decomp) = toy_inputs();
        let ensemble = bootstrap_paths(&model, &decomp, 3, 200, 77).unwrap();
        let wide = prediction_band(&ensemble, 0.05).unwrap();
        let narrow = prediction_band(&ensemble, 0.2).unwrap();
        for h in 0..3 {
            for i in 0..decomp.n_ages() {
                assert!(wide.lower()[(h, i)] <= narrow.lower()[(h, i)] + 1e-12);
                assert!(narrow.upper()[(h, i)] <= wide.upper()[(h, i)] + 1e-12);
                assert!(narrow.lower()[(h, i)] <= narrow.upper()[(h, i)]);
            }
        }
    }

    #[test]
    fn band_requires_two_replicates_and_valid_nu() {
        let (model, decomp) = toy_inputs();
        let single = bootstrap_paths(&model, &decomp, 2, 1, 5).unwrap();
        assert!(prediction_band(&single, 0.2).is_err());
        let ensemble = bootstrap_paths(&model, &decomp, 2, 5, 5).unwrap();
        assert!(prediction_band(&ensemble, 0.0).is_err());
        assert!(prediction_band(&ensemble, 1.0).is_err());
    }
}
