//! Seeded synthetic mortality surfaces.
//!
//! Real national life tables cannot be redistributed, so the test suite
//! and the command line ship with generators instead. All three surfaces
//! share a base age profile (an infant-mortality spike plus an adult
//! hump) and differ in how the profile moves over time:
//!
//! * `stationary_surface` fluctuates around a fixed profile, so longer
//!   histories strictly help and no recency weighting is warranted;
//! * `regime_change_surface` spends most of its history on slow trends
//!   (fading infant mortality, narrowing hump, slow peak drift) and then
//!   switches to a fast rightward peak shift in the last years, so the
//!   directions of recent variation differ from the historical ones;
//! * `gaussian_rank1_surface` follows one smooth component whose score is
//!   a Gaussian random walk with drift plus independent log-scale
//!   residual curves, a clean target for coverage experiments.
//!
//! Generation is deterministic given the spec's seed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lifetable::{LifeTableSeries, Sex};

/// Shape and seed of a synthetic surface.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub years: usize,
    pub start_year: i32,
    pub ages: usize,
    pub radix: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            years: 60,
            start_year: 1961,
            ages: 111,
            radix: 100_000.0,
            seed: 42,
        }
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; one value per call keeps the draw order obvious.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Unnormalized mixture of an infant-mortality spike and an adult hump.
fn mortality_profile(u: f64, infant_weight: f64, peak: f64, width: f64) -> f64 {
    let infant = infant_weight * (-u / 7.0).exp() / 7.0;
    let z = (u - peak) / width;
    let adult = (1.0 - infant_weight) * (-0.5 * z * z).exp() / width;
    infant + adult + 1e-9
}

fn assemble(spec: &SyntheticSpec, log_counts: DMatrix<f64>) -> LifeTableSeries {
    let years: Vec<i32> = (0..spec.years as i32).map(|t| spec.start_year + t).collect();
    let ages: Vec<u32> = (0..spec.ages as u32).collect();
    let counts = log_counts.map(|v| v.exp());
    LifeTableSeries::from_raw_counts(years, ages, counts, spec.radix, Sex::Total)
        .expect("synthetic counts are positive")
}

/// Fluctuations around a fixed profile: two smooth variation patterns
/// with autoregressive scores plus small independent log noise.
pub fn stationary_surface(spec: &SyntheticSpec) -> LifeTableSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.years;
    let a = spec.ages;
    let base: Vec<f64> = (0..a)
        .map(|i| mortality_profile(i as f64, 0.05, 77.0, 10.5).ln())
        .collect();
    let pattern1: Vec<f64> = (0..a)
        .map(|i| (std::f64::consts::PI * i as f64 / (a - 1) as f64).sin())
        .collect();
    let pattern2: Vec<f64> = (0..a)
        .map(|i| (2.0 * std::f64::consts::PI * i as f64 / (a - 1) as f64).cos())
        .collect();

    let mut score1 = 0.0;
    let mut score2 = 0.0;
    let mut log_counts = DMatrix::zeros(n, a);
    for t in 0..n {
        score1 = 0.6 * score1 + 0.12 * standard_normal(&mut rng);
        score2 = 0.6 * score2 + 0.08 * standard_normal(&mut rng);
        for i in 0..a {
            let noise = 0.01 * standard_normal(&mut rng);
            log_counts[(t, i)] =
                base[i] + score1 * pattern1[i] + score2 * pattern2[i] + noise;
        }
    }
    assemble(spec, log_counts)
}

/// Slow historical trends followed by a fast recent peak shift.
///
/// The last `recent_years` years freeze the historical directions
/// (infant level and hump width) and accelerate the hump's rightward
/// drift, so recency-weighted fits should adapt where uniform fits keep
/// explaining stale variation.
pub fn regime_change_surface(spec: &SyntheticSpec, recent_years: usize) -> LifeTableSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.years;
    let a = spec.ages;
    let change = n.saturating_sub(recent_years);

    let mut log_counts = DMatrix::zeros(n, a);
    for t in 0..n {
        let (infant, peak, width) = if t < change {
            let tf = t as f64;
            (
                0.12 - 0.09 * tf / change.max(1) as f64,
                74.0 + 0.05 * tf,
                11.5 - 0.035 * tf,
            )
        } else {
            let tc = change as f64;
            (
                0.03,
                74.0 + 0.05 * tc + 0.35 * (t as f64 - tc),
                11.5 - 0.035 * tc,
            )
        };
        for i in 0..a {
            let noise = 0.012 * standard_normal(&mut rng);
            log_counts[(t, i)] =
                mortality_profile(i as f64, infant, peak, width).ln() + noise;
        }
    }
    assemble(spec, log_counts)
}

/// One smooth component with random-walk-with-drift scores and
/// independent Gaussian residual curves on the log scale.
pub fn gaussian_rank1_surface(spec: &SyntheticSpec) -> LifeTableSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.years;
    let a = spec.ages;
    let base: Vec<f64> = (0..a)
        .map(|i| mortality_profile(i as f64, 0.05, 76.0, 10.0).ln())
        .collect();
    let raw: Vec<f64> = (0..a)
        .map(|i| (i as f64 / (a - 1) as f64 - 0.5) * 2.0)
        .collect();
    let norm: f64 = raw.iter().map(|p| p * p).sum::<f64>().sqrt();
    let pattern: Vec<f64> = raw.iter().map(|p| p / norm).collect();

    let mut score = 0.0;
    let mut log_counts = DMatrix::zeros(n, a);
    for t in 0..n {
        if t > 0 {
            score += 0.25 + 0.35 * standard_normal(&mut rng);
        }
        for i in 0..a {
            let residual = 0.02 * standard_normal(&mut rng);
            log_counts[(t, i)] = base[i] + score * pattern[i] + residual;
        }
    }
    assemble(spec, log_counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surfaces_are_deterministic_given_seed() {
        let spec = SyntheticSpec::default();
        let a = stationary_surface(&spec);
        let b = stationary_surface(&spec);
        assert_eq!(a.counts(), b.counts());
        let other = stationary_surface(&SyntheticSpec { seed: 7, ..spec });
        assert_ne!(a.counts(), other.counts());
    }

    #[test]
    fn surfaces_are_valid_series() {
        let spec = SyntheticSpec {
            years: 25,
            ..SyntheticSpec::default()
        };
        for series in [
            stationary_surface(&spec),
            regime_change_surface(&spec, 10),
            gaussian_rank1_surface(&spec),
        ] {
            assert_eq!(series.n_years(), 25);
            assert_eq!(series.n_ages(), 111);
            for t in 0..series.n_years() {
                let total: f64 = series.year_curve(t).iter().sum();
                assert!((total - series.radix()).abs() < 1e-6 * series.radix());
            }
        }
    }

    #[test]
    fn regime_change_moves_the_peak() {
        let spec = SyntheticSpec {
            years: 50,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let series = regime_change_surface(&spec, 15);
        let argmax = |curve: &[f64]| {
            curve
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let early = argmax(&series.year_curve(5));
        let late = argmax(&series.year_curve(49));
        assert!(late > early + 3, "peak moved only {early} -> {late}");
    }
}
