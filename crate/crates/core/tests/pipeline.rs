//! End-to-end behavior of the fitting and forecasting chain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wcoda_core::annuity::{price_annuity, price_annuity_interval};
use wcoda_core::clr::{clr_inverse, ClrDecomposition};
use wcoda_core::evaluation::{
    expanding_window_backtest, expanding_window_forecasts, select_kappa, BacktestPhase,
    BacktestPlan, IntervalSettings, KappaSpec, MethodConfig, SelectionCriterion,
};
use wcoda_core::fixtures::{regime_change_surface, stationary_surface, SyntheticSpec};
use wcoda_core::forecast::ForecastSet;
use wcoda_core::pipeline::fit_pipeline;
use wcoda_core::uncertainty::{bootstrap_paths, quantile_linear, score_forecast_errors};
use wcoda_core::weighting::make_weights;
use wcoda_core::wfpca::{fit_wfpca_with_basis, KRule, ScoreBasis};

/// The unweighted pathway is pinned against a frozen forecast file.
#[test]
fn kappa_zero_matches_golden_file() {
    let spec = SyntheticSpec {
        years: 60,
        start_year: 1961,
        seed: 42,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let fit = fit_pipeline(&series, 0.0, KRule::Fixed(6), ScoreBasis::Unweighted).unwrap();
    let fc = fit.forecast(10).unwrap();

    let golden = include_str!("data/golden_kappa0.csv");
    let mut checked = 0usize;
    for line in golden.lines().skip(1) {
        let mut fields = line.split(',');
        let h: usize = fields.next().unwrap().parse().unwrap();
        let age: usize = fields.next().unwrap().parse().unwrap();
        let expected: f64 = fields.next().unwrap().parse().unwrap();
        let actual = fc.curve(h)[age];
        let err = (actual - expected).abs() / expected.abs();
        assert!(err < 1e-9, "h={h}, age={age}: {actual} vs {expected}");
        checked += 1;
    }
    assert_eq!(checked, 10 * 111);
}

/// An oracle forecaster that looks the answers up must score zero.
#[test]
fn perfect_memory_method_scores_zero() {
    let spec = SyntheticSpec {
        years: 40,
        start_year: 1981,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let pairs = expanding_window_forecasts(&series, 2010, 2020, 10, None, |train, h_max| {
        let origin = train.last_year();
        Ok((1..=h_max)
            .map(|h| {
                let idx = series.year_index(origin + h as i32).unwrap();
                series.year_curve(idx)
            })
            .collect())
    })
    .unwrap();
    assert_eq!(pairs.len(), (1..=10).sum::<usize>());
    for pair in pairs {
        let idx = series.year_index(pair.target_year).unwrap();
        let actual: Vec<f64> = series
            .year_curve(idx)
            .iter()
            .map(|c| c / series.radix())
            .collect();
        let forecast: Vec<f64> = pair.forecast.iter().map(|c| c / series.radix()).collect();
        let divergence = wcoda_core::evaluation::kld(&actual, &forecast).unwrap();
        assert!(divergence.abs() < 1e-12, "horizon {}", pair.horizon);
    }
}

#[test]
fn backtest_is_deterministic() {
    let spec = SyntheticSpec {
        years: 50,
        start_year: 1971,
        seed: 9,
        ..SyntheticSpec::default()
    };
    let series = regime_change_surface(&spec, 12);
    let plan = BacktestPlan::new(2000, 2010, 2020, 10).unwrap();
    let config = MethodConfig {
        kappa: KappaSpec::Fixed(0.05),
        k_rule: KRule::Fixed(3),
        intervals: Some(IntervalSettings {
            nus: vec![0.2],
            replicates: 50,
            seed: 31,
        }),
        ..MethodConfig::default()
    };
    let a = expanding_window_backtest(&series, &plan, &config).unwrap();
    let b = expanding_window_backtest(&series, &plan, &config).unwrap();
    assert_eq!(a, b);
    assert!(!a.intervals.is_empty());
    for entry in &a.intervals {
        assert!(entry.ecp >= 0.0 && entry.ecp <= 1.0);
        assert!(entry.cpd <= entry.nu.max(1.0 - entry.nu) + 1e-12);
    }
}

#[test]
fn per_horizon_kappa_matches_fixed_runs() {
    let spec = SyntheticSpec {
        years: 50,
        start_year: 1971,
        seed: 13,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let plan = BacktestPlan::new(2005, 2010, 2020, 5).unwrap();
    let kappas = vec![0.0, 0.03, 0.0, 0.1, 0.03];
    let mixed = expanding_window_backtest(
        &series,
        &plan,
        &MethodConfig {
            kappa: KappaSpec::PerHorizon(kappas.clone()),
            k_rule: KRule::Fixed(2),
            phase: BacktestPhase::Validation,
            ..MethodConfig::default()
        },
    )
    .unwrap();
    for (h0, &kappa) in kappas.iter().enumerate() {
        let fixed = expanding_window_backtest(
            &series,
            &plan,
            &MethodConfig {
                kappa: KappaSpec::Fixed(kappa),
                k_rule: KRule::Fixed(2),
                phase: BacktestPhase::Validation,
                ..MethodConfig::default()
            },
        )
        .unwrap();
        let h = h0 + 1;
        assert_eq!(
            mixed.horizon(h).unwrap().kld,
            fixed.horizon(h).unwrap().kld,
            "horizon {h}"
        );
    }
}

#[test]
fn selection_respects_singleton_grid_and_order() {
    let spec = SyntheticSpec {
        years: 40,
        start_year: 1981,
        seed: 21,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let plan = BacktestPlan::new(2010, 2015, 2020, 5).unwrap();
    let config = MethodConfig {
        k_rule: KRule::Fixed(2),
        ..MethodConfig::default()
    };
    let singleton =
        select_kappa(&series, &plan, SelectionCriterion::Kld, &[0.07], &config).unwrap();
    assert_eq!(singleton, vec![0.07; 5]);

    let forward = select_kappa(
        &series,
        &plan,
        SelectionCriterion::Kld,
        &[0.0, 0.05, 0.1],
        &config,
    )
    .unwrap();
    let shuffled = select_kappa(
        &series,
        &plan,
        SelectionCriterion::Kld,
        &[0.1, 0.0, 0.05],
        &config,
    )
    .unwrap();
    assert_eq!(forward, shuffled);
}

#[test]
fn stationary_surface_selects_small_kappa() {
    let spec = SyntheticSpec {
        years: 60,
        start_year: 1961,
        seed: 42,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let plan = BacktestPlan::new(2000, 2010, 2020, 10).unwrap();
    let config = MethodConfig {
        k_rule: KRule::Fixed(2),
        ..MethodConfig::default()
    };
    let grid: Vec<f64> = (0..=30).map(|i| i as f64 * 0.01).collect();
    let kappas = select_kappa(&series, &plan, SelectionCriterion::Kld, &grid, &config).unwrap();
    assert!(
        kappas[0] <= 0.05,
        "stationary data should not reward recency weighting, got {}",
        kappas[0]
    );
}

#[test]
fn cpd_criterion_selects_on_interval_accuracy() {
    let spec = SyntheticSpec {
        years: 45,
        start_year: 1976,
        seed: 33,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let plan = BacktestPlan::new(2012, 2016, 2020, 4).unwrap();
    let config = MethodConfig {
        k_rule: KRule::Fixed(2),
        intervals: Some(IntervalSettings {
            nus: vec![0.2],
            replicates: 60,
            seed: 17,
        }),
        ..MethodConfig::default()
    };
    let kappas = select_kappa(
        &series,
        &plan,
        SelectionCriterion::Cpd { nu: 0.2 },
        &[0.0, 0.05, 0.1],
        &config,
    )
    .unwrap();
    assert_eq!(kappas.len(), 4);
    for kappa in kappas {
        assert!([0.0, 0.05, 0.1].contains(&kappa));
    }
}

/// Exact rank-one model with Gaussian score innovations: bootstrap cell
/// quantiles must match both the enumerated pushforward of the error
/// sample and the analytic Gaussian quantiles.
#[test]
fn bootstrap_quantiles_match_analytic_oracle() {
    let n = 2000usize;
    let n_ages = 7usize;
    let sigma = 0.35;
    let drift = 0.02;
    let radix = 1000.0;

    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let raw_phi: Vec<f64> = (0..n_ages).map(|i| 0.3 + 0.1 * i as f64).collect();
    let norm: f64 = raw_phi.iter().map(|p| p * p).sum::<f64>().sqrt();
    let phi: Vec<f64> = raw_phi.iter().map(|p| p / norm).collect();

    let mut gamma = vec![0.0f64; n];
    for t in 1..n {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random::<f64>();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        gamma[t] = gamma[t - 1] + drift + sigma * z;
    }
    let mean = gamma.iter().sum::<f64>() / n as f64;
    let beta = DMatrix::from_fn(n, n_ages, |t, i| (gamma[t] - mean) * phi[i]);
    let alpha = DVector::from_element(n_ages, 10.0);
    let scheme = make_weights(0.0, n).unwrap();
    let decomp = ClrDecomposition::from_parts(alpha, beta, scheme, radix).unwrap();
    let model = fit_wfpca_with_basis(&decomp, KRule::Fixed(1), ScoreBasis::Unweighted).unwrap();

    let b = 10_000usize;
    let ensemble = bootstrap_paths(&model, &decomp, 1, b, 99).unwrap();

    // enumerate the exact pushforward of every error through the
    // inverse transform
    let scores = model.score_series(0);
    let errors = score_forecast_errors(&scores, 1).unwrap();
    let point = wcoda_core::forecast::forecast_scores(&model, 1).unwrap().point[0];
    let eigenfunction: Vec<f64> = (0..n_ages).map(|i| model.eigenfunctions()[(0, i)]).collect();
    let push_cell = |epsilon: f64, age: usize| -> f64 {
        let beta_hat =
            DVector::from_fn(n_ages, |i, _| (point + epsilon) * eigenfunction[i]);
        clr_inverse(&beta_hat, decomp.alpha(), radix).unwrap()[age]
    };

    // the age where the eigenfunction peaks gives a monotone map
    let age_star = (0..n_ages)
        .max_by(|&a, &b| eigenfunction[a].partial_cmp(&eigenfunction[b]).unwrap())
        .unwrap();
    let mut population: Vec<f64> = errors.iter().map(|&e| push_cell(e, age_star)).collect();
    population.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut cell = ensemble.cell_values(1, age_star);
    cell.sort_by(|a, b| a.partial_cmp(b).unwrap());

    for p in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let estimate = quantile_linear(&cell, p);
        // distribution-free band: the resampled quantile must fall
        // between population quantiles three binomial deviations away
        let spread = 3.0 * (p * (1.0 - p) / b as f64).sqrt();
        let lo = quantile_linear(&population, (p - spread).max(0.0));
        let hi = quantile_linear(&population, (p + spread).min(1.0));
        assert!(
            estimate >= lo && estimate <= hi,
            "p={p}: {estimate} outside [{lo}, {hi}]"
        );

        // analytic Gaussian bracket: the error sample itself is a size-n
        // draw from N(0, ~sigma^2), so allow its sampling error too
        let z = inverse_normal_cdf(p);
        let quantile_se = (p * (1.0 - p) / n as f64).sqrt()
            / ((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
            * sigma;
        let lo = push_cell(sigma * z - 4.0 * quantile_se, age_star);
        let hi = push_cell(sigma * z + 4.0 * quantile_se, age_star);
        assert!(
            estimate >= lo && estimate <= hi,
            "p={p}: {estimate} outside analytic [{lo}, {hi}]"
        );
    }
}

/// Acklam-style rational approximation, accurate to ~1e-9.
fn inverse_normal_cdf(p: f64) -> f64 {
    let a = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    let b = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    let c = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    let d = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

#[test]
fn bootstrap_is_invariant_to_thread_count() {
    let spec = SyntheticSpec {
        years: 40,
        start_year: 1981,
        seed: 55,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let fit = fit_pipeline(&series, 0.05, KRule::Fixed(2), ScoreBasis::Unweighted).unwrap();
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit.bootstrap(4, 64, 7).unwrap())
    };
    let single = run_with(1);
    let many = run_with(8);
    for b in 0..64 {
        assert_eq!(single.path(b), many.path(b), "replicate {b}");
    }
}

#[test]
fn extreme_scores_are_clamped_and_reported() {
    // a huge linear trend on the log scale forces the extrapolated curve
    // past the exponentiation guard
    let n = 6;
    let n_ages = 4;
    let phi = [0.5, 0.5, 0.5, 0.5];
    let beta = DMatrix::from_fn(n, n_ages, |t, i| {
        300.0 * (t as f64 - (n as f64 - 1.0) / 2.0) * phi[i]
    });
    let alpha = DVector::from_element(n_ages, 1.0);
    let scheme = make_weights(0.0, n).unwrap();
    let decomp = ClrDecomposition::from_parts(alpha, beta, scheme, 100.0).unwrap();
    let model = fit_wfpca_with_basis(&decomp, KRule::Fixed(1), ScoreBasis::Unweighted).unwrap();
    let fc = wcoda_core::forecast::forecast_death_counts(&model, &decomp, 3).unwrap();
    assert!(fc.clamped() > 0, "expected clamping to be reported");
    for h in 1..=3 {
        let total: f64 = fc.curve(h).iter().sum();
        assert!((total - 100.0).abs() < 1e-6 * 100.0);
    }
}

#[test]
fn annuity_interval_behavior() {
    let spec = SyntheticSpec {
        years: 50,
        start_year: 1971,
        seed: 77,
        ..SyntheticSpec::default()
    };
    let series = stationary_surface(&spec);
    let fit = fit_pipeline(&series, 0.02, KRule::Fixed(3), ScoreBasis::Unweighted).unwrap();
    let ensemble = fit.bootstrap(30, 400, 2020).unwrap();

    let q95 = price_annuity_interval(&ensemble, 60, 20, 0.03, 0.05).unwrap();
    let q80 = price_annuity_interval(&ensemble, 60, 20, 0.03, 0.2).unwrap();
    let (lo95, hi95) = q95.interval.unwrap();
    let (lo80, hi80) = q80.interval.unwrap();
    assert!(lo95 <= lo80 && hi80 <= hi95, "wider level must nest");
    assert!(lo95 <= q95.price && q95.price <= hi95);

    // the interval contains the price of the point forecast as well
    let point = fit.forecast(30).unwrap();
    let point_price = price_annuity(&point, 60, 20, 0.03).unwrap().price;
    assert!(
        lo95 <= point_price && point_price <= hi95,
        "point price {point_price} outside [{lo95}, {hi95}]"
    );

    // degenerate ensemble: identical paths give a zero-width interval
    let single = fit.bootstrap(30, 1, 3030).unwrap();
    let path = single.path(0).clone();
    let degenerate_prices = price_annuity(
        &ForecastSet::from_curves(path, single.radix()),
        60,
        20,
        0.03,
    )
    .unwrap()
    .price;
    // replicate-level pricing equals pricing the path directly
    let one = price_annuity_interval(&single, 60, 20, 0.03, 0.05).unwrap();
    assert_eq!(one.price, degenerate_prices);
    let (lo, hi) = one.interval.unwrap();
    assert_eq!(lo, hi);
}

#[test]
fn window_truncation_changes_training_data() {
    let spec = SyntheticSpec {
        years: 60,
        start_year: 1961,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let series = regime_change_surface(&spec, 15);
    let plan = BacktestPlan::new(2000, 2010, 2020, 10).unwrap();
    let full = expanding_window_backtest(
        &series,
        &plan,
        &MethodConfig {
            k_rule: KRule::Fixed(2),
            ..MethodConfig::default()
        },
    )
    .unwrap();
    let anchored = expanding_window_backtest(
        &series,
        &plan,
        &MethodConfig {
            k_rule: KRule::Fixed(2),
            fit_start: Some(1991),
            ..MethodConfig::default()
        },
    )
    .unwrap();
    assert_ne!(full.horizon(1).unwrap().kld, anchored.horizon(1).unwrap().kld);
}
