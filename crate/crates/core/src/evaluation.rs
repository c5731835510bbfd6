//! Forecast accuracy metrics, the expanding-window backtest, and
//! per-horizon selection of the decay parameter.
//!
//! Point accuracy uses density divergences: the symmetrized discrete
//! Kullback-Leibler divergence and two Jensen-Shannon variants. Counts
//! are divided by the radix before comparison so both arguments are
//! probability vectors. Interval accuracy uses the empirical coverage
//! probability of prediction bands and its absolute deviation from the
//! nominal level.
//!
//! The backtest refits the whole pipeline on expanding training windows.
//! With an evaluation segment of `S` years and maximum horizon `H = S`,
//! horizon `h` pools the `S - h + 1` forecasts that target evaluation
//! years from different origins, so a 10-year segment yields 10 one-step,
//! 9 two-step, ..., 1 ten-step forecasts. Reported divergences at horizon
//! `h` average over every pooled cell, i.e. the raw sums are divided by
//! `ages * (S - h + 1)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CodaError, Result};
use crate::lifetable::LifeTableSeries;
use crate::pipeline::fit_pipeline;
use crate::uncertainty::PredictionBand;
use crate::wfpca::{KRule, ScoreBasis};

/// Symmetrized discrete Kullback-Leibler divergence.
///
/// Returns the raw sum over cells of both directed divergences; callers
/// that follow the per-cell reporting convention divide by the pooled
/// cell count afterwards.
pub fn kld(p: &[f64], q: &[f64]) -> Result<f64> {
    check_density_pair(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        total += pi * (pi.ln() - qi.ln());
        total += qi * (qi.ln() - pi.ln());
    }
    Ok(total)
}

/// Mean used inside the Jensen-Shannon divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanRule {
    Simple,
    Geometric,
}

/// Jensen-Shannon divergence `(D(p||m) + D(q||m)) / 2` with `m` either
/// the arithmetic or the pointwise geometric mean of the pair.
pub fn jsd(p: &[f64], q: &[f64], rule: MeanRule) -> Result<f64> {
    check_density_pair(p, q)?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = match rule {
            MeanRule::Simple => 0.5 * (pi + qi),
            MeanRule::Geometric => (pi * qi).sqrt(),
        };
        total += 0.5 * pi * (pi.ln() - mi.ln());
        total += 0.5 * qi * (qi.ln() - mi.ln());
    }
    Ok(total)
}

fn check_density_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(CodaError::domain(format!(
            "density lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(CodaError::domain("empty density vectors"));
    }
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if !(pi > 0.0) || !(qi > 0.0) {
            return Err(CodaError::domain(format!(
                "densities must be strictly positive, found ({pi}, {qi}) at cell {i}"
            )));
        }
    }
    Ok(())
}

/// Per-horizon empirical coverage probability and its absolute deviation
/// from the nominal level, over the ages of one aligned actual/band set.
///
/// Row `h - 1` of `actuals` must hold the realized curve for the band's
/// horizon `h`.
pub fn ecp_cpd(actuals: &DMatrix<f64>, band: &PredictionBand) -> Result<Vec<(f64, f64)>> {
    if actuals.nrows() != band.horizons() || actuals.ncols() != band.n_ages() {
        return Err(CodaError::domain(format!(
            "actuals shape ({}, {}) does not match band shape ({}, {})",
            actuals.nrows(),
            actuals.ncols(),
            band.horizons(),
            band.n_ages()
        )));
    }
    let nominal = 1.0 - band.nu();
    let mut out = Vec::with_capacity(band.horizons());
    for h in 0..band.horizons() {
        let mut exceed = 0usize;
        for i in 0..band.n_ages() {
            let actual = actuals[(h, i)];
            if actual > band.upper()[(h, i)] || actual < band.lower()[(h, i)] {
                exceed += 1;
            }
        }
        let ecp = 1.0 - exceed as f64 / band.n_ages() as f64;
        out.push((ecp, (ecp - nominal).abs()));
    }
    Ok(out)
}

/// Year boundaries splitting a series into training, validation, and
/// testing segments, plus the maximum forecast horizon.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BacktestPlan {
    pub train_end: i32,
    pub validation_end: i32,
    pub test_end: i32,
    pub max_horizon: usize,
}

impl BacktestPlan {
    pub fn new(train_end: i32, validation_end: i32, test_end: i32, max_horizon: usize) -> Result<Self> {
        if !(train_end < validation_end && validation_end < test_end) {
            return Err(CodaError::domain(format!(
                "plan boundaries must increase: {train_end} / {validation_end} / {test_end}"
            )));
        }
        if max_horizon == 0 {
            return Err(CodaError::domain("maximum horizon must be at least 1"));
        }
        let validation_span = (validation_end - train_end) as usize;
        let test_span = (test_end - validation_end) as usize;
        if validation_span < max_horizon || test_span < max_horizon {
            return Err(CodaError::domain(format!(
                "validation span {validation_span} and test span {test_span} \
                 must both cover the maximum horizon {max_horizon}"
            )));
        }
        Ok(Self {
            train_end,
            validation_end,
            test_end,
            max_horizon,
        })
    }

    fn validate_for(&self, data: &LifeTableSeries) -> Result<()> {
        if data.first_year() + 1 > self.train_end {
            return Err(CodaError::domain(format!(
                "training segment ending {} needs at least 2 years of data \
                 starting {}",
                self.train_end,
                data.first_year()
            )));
        }
        if data.last_year() < self.test_end {
            return Err(CodaError::domain(format!(
                "data ends {} before the plan's test end {}",
                data.last_year(),
                self.test_end
            )));
        }
        Ok(())
    }
}

/// Which segment the backtest forecasts into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BacktestPhase {
    /// Fit through `train_end`, forecast the validation years.
    Validation,
    /// Fit through `validation_end`, forecast the test years.
    Test,
}

/// Decay parameter applied during a backtest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KappaSpec {
    /// One value for every horizon.
    Fixed(f64),
    /// One value per horizon, index 0 holding horizon 1.
    PerHorizon(Vec<f64>),
}

impl KappaSpec {
    fn for_horizon(&self, h: usize) -> Result<f64> {
        match self {
            KappaSpec::Fixed(k) => Ok(*k),
            KappaSpec::PerHorizon(ks) => ks.get(h - 1).copied().ok_or_else(|| {
                CodaError::domain(format!(
                    "no decay parameter supplied for horizon {h} (have {})",
                    ks.len()
                ))
            }),
        }
    }
}

/// Bootstrap settings for interval metrics inside a backtest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalSettings {
    /// Significance levels to evaluate, e.g. 0.2 and 0.05.
    pub nus: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
}

/// Full method configuration for a backtest run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodConfig {
    pub kappa: KappaSpec,
    pub k_rule: KRule,
    pub basis: ScoreBasis,
    /// Anchor the training window at this year instead of the start of
    /// the data; the window still expands at its right edge.
    pub fit_start: Option<i32>,
    pub intervals: Option<IntervalSettings>,
    pub phase: BacktestPhase,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            kappa: KappaSpec::Fixed(0.0),
            k_rule: KRule::Fixed(6),
            basis: ScoreBasis::default(),
            fit_start: None,
            intervals: None,
            phase: BacktestPhase::Test,
        }
    }
}

/// Point errors pooled at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonPointErrors {
    pub horizon: usize,
    /// Number of pooled forecasts at this horizon.
    pub n_forecasts: usize,
    pub kld: f64,
    pub jsd_simple: f64,
    pub jsd_geometric: f64,
}

/// Interval errors pooled at one horizon and one significance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonIntervalErrors {
    pub nu: f64,
    pub horizon: usize,
    pub ecp: f64,
    pub cpd: f64,
}

/// Per-origin diagnostics: cell-averaged divergences of one forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginRecord {
    pub origin_year: i32,
    pub horizon: usize,
    pub target_year: i32,
    pub kld: f64,
    pub jsd_simple: f64,
    pub jsd_geometric: f64,
}

/// Backtest output: pooled per-horizon metrics plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub horizons: Vec<HorizonPointErrors>,
    pub mean_kld: f64,
    pub mean_jsd_simple: f64,
    pub mean_jsd_geometric: f64,
    pub intervals: Vec<HorizonIntervalErrors>,
    pub origins: Vec<OriginRecord>,
}

impl ErrorReport {
    /// The pooled point metric values at one horizon.
    pub fn horizon(&self, h: usize) -> Option<&HorizonPointErrors> {
        self.horizons.iter().find(|e| e.horizon == h)
    }

    /// The pooled interval metrics at one horizon and level.
    pub fn interval(&self, h: usize, nu: f64) -> Option<&HorizonIntervalErrors> {
        self.intervals
            .iter()
            .find(|e| e.horizon == h && (e.nu - nu).abs() < 1e-12)
    }
}

/// One forecast produced inside an expanding-window run.
#[derive(Debug, Clone)]
pub struct ForecastPair {
    pub origin_year: i32,
    pub horizon: usize,
    pub target_year: i32,
    pub forecast: Vec<f64>,
}

/// Runs the expanding-window loop with an arbitrary forecaster.
///
/// For each origin (the last training year, starting at `fit_end` and
/// advancing through the evaluation segment), the forecaster receives the
/// training window and the number of horizons still inside the segment,
/// and must return one curve per horizon. Useful for plugging oracle
/// methods into the same bookkeeping as the real pipeline.
pub fn expanding_window_forecasts<F>(
    data: &LifeTableSeries,
    fit_end: i32,
    eval_end: i32,
    max_horizon: usize,
    fit_start: Option<i32>,
    mut forecaster: F,
) -> Result<Vec<ForecastPair>>
where
    F: FnMut(&LifeTableSeries, usize) -> Result<Vec<Vec<f64>>>,
{
    if eval_end <= fit_end {
        return Err(CodaError::domain(format!(
            "evaluation segment {fit_end}..{eval_end} is empty"
        )));
    }
    let span = (eval_end - fit_end) as usize;
    let start = fit_start.unwrap_or_else(|| data.first_year());
    let mut pairs = Vec::new();
    for offset in 0..span {
        let origin_year = fit_end + offset as i32;
        let h_max = max_horizon.min(span - offset);
        if h_max == 0 {
            break;
        }
        let train = data.window(start, origin_year)?;
        let curves = forecaster(&train, h_max)?;
        if curves.len() != h_max {
            return Err(CodaError::domain(format!(
                "forecaster returned {} curves, expected {h_max}",
                curves.len()
            )));
        }
        for (h0, forecast) in curves.into_iter().enumerate() {
            pairs.push(ForecastPair {
                origin_year,
                horizon: h0 + 1,
                target_year: origin_year + h0 as i32 + 1,
                forecast,
            });
        }
    }
    Ok(pairs)
}

fn phase_bounds(plan: &BacktestPlan, phase: BacktestPhase) -> (i32, i32) {
    match phase {
        BacktestPhase::Validation => (plan.train_end, plan.validation_end),
        BacktestPhase::Test => (plan.validation_end, plan.test_end),
    }
}

/// Expanding-window backtest of the weighted pipeline.
pub fn expanding_window_backtest(
    data: &LifeTableSeries,
    plan: &BacktestPlan,
    config: &MethodConfig,
) -> Result<ErrorReport> {
    plan.validate_for(data)?;
    let (fit_end, eval_end) = phase_bounds(plan, config.phase);
    let span = (eval_end - fit_end) as usize;
    let radix = data.radix();
    let n_ages = data.n_ages();
    let start = config.fit_start.unwrap_or_else(|| data.first_year());
    if start >= fit_end {
        return Err(CodaError::domain(format!(
            "fit start {start} leaves no training data before {fit_end}"
        )));
    }

    let mut pairs: Vec<ForecastPair> = Vec::new();
    // exceedance counts per (nu index, horizon)
    let interval_nus: Vec<f64> = config
        .intervals
        .as_ref()
        .map(|s| s.nus.clone())
        .unwrap_or_default();
    let mut exceedances: Vec<BTreeMap<usize, usize>> =
        interval_nus.iter().map(|_| BTreeMap::new()).collect();

    for offset in 0..span {
        let origin_year = fit_end + offset as i32;
        let h_max = plan.max_horizon.min(span - offset);
        if h_max == 0 {
            break;
        }
        let train = data.window(start, origin_year)?;

        // Group horizons by their decay parameter so each distinct value
        // is fitted once per origin.
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for h in 1..=h_max {
            let kappa = config.kappa.for_horizon(h)?;
            match groups.iter_mut().find(|(k, _)| *k == kappa) {
                Some((_, hs)) => hs.push(h),
                None => groups.push((kappa, vec![h])),
            }
        }

        for (group_idx, (kappa, horizons)) in groups.iter().enumerate() {
            let fit = fit_pipeline(&train, *kappa, config.k_rule, config.basis)?;
            let group_h_max = *horizons.last().expect("non-empty group");
            let forecast = fit.forecast(group_h_max)?;
            for &h in horizons {
                pairs.push(ForecastPair {
                    origin_year,
                    horizon: h,
                    target_year: origin_year + h as i32,
                    forecast: forecast.curve(h),
                });
            }

            if let Some(settings) = &config.intervals {
                let seed = settings
                    .seed
                    .wrapping_add((offset as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                    .wrapping_add(group_idx as u64);
                let ensemble = fit.bootstrap(group_h_max, settings.replicates, seed)?;
                for (nu_idx, &nu) in interval_nus.iter().enumerate() {
                    let band = crate::uncertainty::prediction_band(&ensemble, nu)?;
                    for &h in horizons {
                        let target = data
                            .year_index(origin_year + h as i32)
                            .expect("target year inside data");
                        let actual = data.year_curve(target);
                        let mut exceed = 0usize;
                        for i in 0..n_ages {
                            if actual[i] > band.upper()[(h - 1, i)]
                                || actual[i] < band.lower()[(h - 1, i)]
                            {
                                exceed += 1;
                            }
                        }
                        *exceedances[nu_idx].entry(h).or_insert(0) += exceed;
                    }
                }
            }
        }
    }

    assemble_report(data, pairs, &interval_nus, &exceedances, n_ages, radix, span)
}

fn assemble_report(
    data: &LifeTableSeries,
    pairs: Vec<ForecastPair>,
    interval_nus: &[f64],
    exceedances: &[BTreeMap<usize, usize>],
    n_ages: usize,
    radix: f64,
    span: usize,
) -> Result<ErrorReport> {
    let mut per_horizon: BTreeMap<usize, (usize, f64, f64, f64)> = BTreeMap::new();
    let mut origins = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let target = data
            .year_index(pair.target_year)
            .ok_or_else(|| CodaError::domain(format!("target year {} missing", pair.target_year)))?;
        let actual: Vec<f64> = data.year_curve(target).iter().map(|c| c / radix).collect();
        let forecast: Vec<f64> = pair.forecast.iter().map(|c| c / radix).collect();
        let pair_kld = kld(&actual, &forecast)?;
        let pair_jsd_s = jsd(&actual, &forecast, MeanRule::Simple)?;
        let pair_jsd_g = jsd(&actual, &forecast, MeanRule::Geometric)?;
        let entry = per_horizon.entry(pair.horizon).or_insert((0, 0.0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += pair_kld;
        entry.2 += pair_jsd_s;
        entry.3 += pair_jsd_g;
        origins.push(OriginRecord {
            origin_year: pair.origin_year,
            horizon: pair.horizon,
            target_year: pair.target_year,
            kld: pair_kld / n_ages as f64,
            jsd_simple: pair_jsd_s / n_ages as f64,
            jsd_geometric: pair_jsd_g / n_ages as f64,
        });
    }

    let horizons: Vec<HorizonPointErrors> = per_horizon
        .iter()
        .map(|(&h, &(count, kld_sum, jsd_s_sum, jsd_g_sum))| {
            let cells = (n_ages * count) as f64;
            HorizonPointErrors {
                horizon: h,
                n_forecasts: count,
                kld: kld_sum / cells,
                jsd_simple: jsd_s_sum / cells,
                jsd_geometric: jsd_g_sum / cells,
            }
        })
        .collect();
    let h_count = horizons.len().max(1) as f64;
    let mean_kld = horizons.iter().map(|e| e.kld).sum::<f64>() / h_count;
    let mean_jsd_simple = horizons.iter().map(|e| e.jsd_simple).sum::<f64>() / h_count;
    let mean_jsd_geometric = horizons.iter().map(|e| e.jsd_geometric).sum::<f64>() / h_count;

    let mut intervals = Vec::new();
    for (nu_idx, &nu) in interval_nus.iter().enumerate() {
        for (&h, &exceed) in &exceedances[nu_idx] {
            let count = span + 1 - h;
            let cells = (n_ages * count) as f64;
            let ecp = 1.0 - exceed as f64 / cells;
            intervals.push(HorizonIntervalErrors {
                nu,
                horizon: h,
                ecp,
                cpd: (ecp - (1.0 - nu)).abs(),
            });
        }
    }

    Ok(ErrorReport {
        horizons,
        mean_kld,
        mean_jsd_simple,
        mean_jsd_geometric,
        intervals,
        origins,
    })
}

/// Criterion minimized when selecting the decay parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    Kld,
    JsdSimple,
    JsdGeometric,
    Cpd { nu: f64 },
}

/// Default bootstrap size used while scanning the grid for the coverage
/// criterion; the final report should use the full replicate count.
pub const GRID_SEARCH_REPLICATES: usize = 200;

/// Selects one decay parameter per horizon by minimizing the criterion
/// over the grid on the validation segment. Ties break toward the
/// smallest parameter; the result does not depend on grid order.
pub fn select_kappa(
    data: &LifeTableSeries,
    plan: &BacktestPlan,
    criterion: SelectionCriterion,
    grid: &[f64],
    config: &MethodConfig,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(CodaError::domain("empty decay parameter grid"));
    }
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid values"));
    sorted_grid.dedup();

    let intervals = match criterion {
        SelectionCriterion::Cpd { nu } => Some(IntervalSettings {
            nus: vec![nu],
            replicates: config
                .intervals
                .as_ref()
                .map(|s| s.replicates)
                .unwrap_or(GRID_SEARCH_REPLICATES),
            seed: config.intervals.as_ref().map(|s| s.seed).unwrap_or(0),
        }),
        _ => None,
    };

    let mut best: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NAN); plan.max_horizon];
    for &kappa in &sorted_grid {
        let run_config = MethodConfig {
            kappa: KappaSpec::Fixed(kappa),
            phase: BacktestPhase::Validation,
            intervals: intervals.clone(),
            ..config.clone()
        };
        let report = expanding_window_backtest(data, plan, &run_config)?;
        for h in 1..=plan.max_horizon {
            let value = match criterion {
                SelectionCriterion::Kld => report.horizon(h).map(|e| e.kld),
                SelectionCriterion::JsdSimple => report.horizon(h).map(|e| e.jsd_simple),
                SelectionCriterion::JsdGeometric => report.horizon(h).map(|e| e.jsd_geometric),
                SelectionCriterion::Cpd { nu } => report.interval(h, nu).map(|e| e.cpd),
            }
            .ok_or_else(|| {
                CodaError::domain(format!("criterion unavailable at horizon {h}"))
            })?;
            if value < best[h - 1].0 {
                best[h - 1] = (value, kappa);
            }
        }
    }
    Ok(best.into_iter().map(|(_, kappa)| kappa).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kld_zero_on_identical_densities() {
        let p = [0.2, 0.3, 0.5];
        assert_relative_eq!(kld(&p, &p).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kld_is_symmetric() {
        let p = [0.1, 0.4, 0.5];
        let q = [0.3, 0.3, 0.4];
        assert_relative_eq!(
            kld(&p, &q).unwrap(),
            kld(&q, &p).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn kld_two_cell_hand_value() {
        let p = [0.5, 0.5];
        let q = [0.9, 0.1];
        assert_relative_eq!(
            kld(&p, &q).unwrap(),
            0.4 * 9.0_f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn kld_rejects_zero_cells() {
        assert!(kld(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn jsd_zero_on_identical_densities() {
        let p = [0.25, 0.25, 0.5];
        for rule in [MeanRule::Simple, MeanRule::Geometric] {
            assert_relative_eq!(jsd(&p, &p, rule).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn jsd_simple_approaches_ln2_on_disjoint_support() {
        let eps = 1e-12;
        let p = [1.0 - eps, eps];
        let q = [eps, 1.0 - eps];
        let value = jsd(&p, &q, MeanRule::Simple).unwrap();
        assert!(value <= 2.0_f64.ln() + 1e-12);
        assert!((value - 2.0_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn jsd_matches_direct_formula_oracle() {
        let p = [0.12, 0.18, 0.4, 0.3];
        let q = [0.25, 0.25, 0.25, 0.25];
        // direct formula recomputation, one directed divergence at a time
        let dkl = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(&x, &y)| x * (x.ln() - y.ln())).sum()
        };
        let simple: Vec<f64> = p.iter().zip(&q).map(|(&a, &b)| 0.5 * (a + b)).collect();
        let geometric: Vec<f64> = p.iter().zip(&q).map(|(&a, &b)| (a * b).sqrt()).collect();
        assert_relative_eq!(
            jsd(&p, &q, MeanRule::Simple).unwrap(),
            0.5 * dkl(&p, &simple) + 0.5 * dkl(&q, &simple),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            jsd(&p, &q, MeanRule::Geometric).unwrap(),
            0.5 * dkl(&p, &geometric) + 0.5 * dkl(&q, &geometric),
            max_relative = 1e-13
        );
    }

    fn band(nu: f64, lower: f64, upper: f64, shape: (usize, usize)) -> PredictionBand {
        PredictionBand::from_curves(
            nu,
            DMatrix::from_element(shape.0, shape.1, lower),
            DMatrix::from_element(shape.0, shape.1, upper),
        )
        .unwrap()
    }

    #[test]
    fn full_coverage_gives_cpd_nu() {
        let actuals = DMatrix::from_element(2, 10, 5.0);
        let results = ecp_cpd(&actuals, &band(0.2, 0.0, 10.0, (2, 10))).unwrap();
        for (ecp, cpd) in results {
            assert_relative_eq!(ecp, 1.0);
            assert_relative_eq!(cpd, 0.2, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_coverage_gives_cpd_one_minus_nu() {
        let actuals = DMatrix::from_element(3, 5, 100.0);
        let results = ecp_cpd(&actuals, &band(0.2, 0.0, 10.0, (3, 5))).unwrap();
        for (ecp, cpd) in results {
            assert_relative_eq!(ecp, 0.0);
            assert_relative_eq!(cpd, 0.8, max_relative = 1e-12);
        }
    }

    #[test]
    fn exact_nominal_coverage_gives_zero_cpd() {
        // 10 ages with exactly 2 outside the band at nu = 0.2
        let mut actuals = DMatrix::from_element(1, 10, 5.0);
        actuals[(0, 0)] = 20.0;
        actuals[(0, 5)] = -3.0;
        let results = ecp_cpd(&actuals, &band(0.2, 0.0, 10.0, (1, 10))).unwrap();
        assert_relative_eq!(results[0].0, 0.8, max_relative = 1e-12);
        assert!(results[0].1.abs() < 1e-12);
    }

    #[test]
    fn misaligned_shapes_rejected() {
        let actuals = DMatrix::from_element(2, 4, 5.0);
        assert!(ecp_cpd(&actuals, &band(0.2, 0.0, 10.0, (2, 5))).is_err());
    }

    #[test]
    fn plan_boundaries_validated() {
        assert!(BacktestPlan::new(2000, 2010, 2020, 10).is_ok());
        assert!(BacktestPlan::new(2010, 2010, 2020, 10).is_err());
        assert!(BacktestPlan::new(2000, 2005, 2020, 10).is_err());
        assert!(BacktestPlan::new(2000, 2010, 2020, 0).is_err());
    }
}
