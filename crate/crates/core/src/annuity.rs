//! Survival probabilities and temporary immediate annuity pricing.
//!
//! Survival follows the cohort diagonal of the forecast tables: a person
//! aged `x` in the last observed year is exposed to the age `x + j`
//! mortality of the year `j + 1` forecast table. Within a forecast year,
//! the number alive at age `u` is the tail sum of that year's death
//! counts, which is valid because every forecast table is closed to the
//! radix. The annuity pays one unit at the end of each survived year up
//! to the maturity, discounted at a constant continuously compounded
//! rate.

use serde::{Deserialize, Serialize};

use crate::error::{CodaError, Result};
use crate::forecast::ForecastSet;
use crate::uncertainty::{quantile_linear, BootstrapEnsemble};

/// Terminal age of the canonical grid; quotes must satisfy
/// `age + maturity <= MAX_QUOTE_AGE`.
pub const MAX_QUOTE_AGE: u32 = 110;

/// A priced annuity, optionally with a bootstrap interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnuityQuote {
    pub age: u32,
    pub maturity: u32,
    pub rate: f64,
    pub price: f64,
    pub interval: Option<(f64, f64)>,
}

/// Price of a zero-coupon bond maturing in `tau` years.
pub fn bond_price(zeta: f64, tau: u32) -> f64 {
    (-zeta * tau as f64).exp()
}

/// Cohort survival probabilities `tau = 1..=maturity` for a person aged
/// `age` at the forecast origin.
pub fn survival_probabilities(
    forecasts: &ForecastSet,
    age: u32,
    maturity: u32,
) -> Result<Vec<f64>> {
    let terminal = forecasts.n_ages() as u32 - 1;
    if maturity == 0 {
        return Err(CodaError::domain("maturity must be at least 1 year"));
    }
    if age + maturity > terminal {
        return Err(CodaError::domain(format!(
            "age {age} plus maturity {maturity} exceeds the terminal age {terminal}"
        )));
    }
    if forecasts.horizons() < maturity as usize {
        return Err(CodaError::domain(format!(
            "need {maturity} forecast horizons, have {}",
            forecasts.horizons()
        )));
    }

    let mut probabilities = Vec::with_capacity(maturity as usize);
    let mut cumulative = 1.0;
    for j in 0..maturity {
        let curve = forecasts.curve(j as usize + 1);
        let current_age = (age + j) as usize;
        let alive: f64 = curve[current_age..].iter().sum();
        let q = if alive > 0.0 {
            let q = curve[current_age] / alive;
            if q > 1.0 + 1e-9 {
                return Err(CodaError::domain(format!(
                    "death probability {q} exceeds one at forecast year {}, age {}",
                    j + 1,
                    current_age
                )));
            }
            q.min(1.0)
        } else {
            // cohort already exhausted below this age
            1.0
        };
        cumulative *= 1.0 - q;
        probabilities.push(cumulative);
    }
    Ok(probabilities)
}

/// Point price of a temporary immediate annuity paying one unit per year.
pub fn price_annuity(
    forecasts: &ForecastSet,
    age: u32,
    maturity: u32,
    zeta: f64,
) -> Result<AnnuityQuote> {
    let survival = survival_probabilities(forecasts, age, maturity)?;
    let price = survival
        .iter()
        .enumerate()
        .map(|(j, &p)| bond_price(zeta, j as u32 + 1) * p)
        .sum();
    Ok(AnnuityQuote {
        age,
        maturity,
        rate: zeta,
        price,
        interval: None,
    })
}

/// Interval price from a bootstrap ensemble: every replicate path is
/// priced end to end and the quote carries the median price together
/// with the `nu/2` and `1 - nu/2` empirical quantiles.
pub fn price_annuity_interval(
    ensemble: &BootstrapEnsemble,
    age: u32,
    maturity: u32,
    zeta: f64,
    nu: f64,
) -> Result<AnnuityQuote> {
    if !(0.0 < nu && nu < 1.0) {
        return Err(CodaError::domain(format!(
            "significance level must lie in (0, 1), got {nu}"
        )));
    }
    let mut prices = Vec::with_capacity(ensemble.replicates());
    for b in 0..ensemble.replicates() {
        let path = ForecastSet::from_curves(ensemble.path(b).clone(), ensemble.radix());
        prices.push(price_annuity(&path, age, maturity, zeta)?.price);
    }
    prices.sort_by(|a, b| a.partial_cmp(b).expect("finite prices"));
    Ok(AnnuityQuote {
        age,
        maturity,
        rate: zeta,
        price: quantile_linear(&prices, 0.5),
        interval: Some((
            quantile_linear(&prices, nu / 2.0),
            quantile_linear(&prices, 1.0 - nu / 2.0),
        )),
    })
}
