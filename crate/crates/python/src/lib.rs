//! Python bindings exposing the main types and operations: life tables,
//! weights, the fitted pipeline with forecasts and intervals, accuracy
//! metrics, weight selection, and annuity pricing.

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wcoda_core::annuity::{price_annuity, price_annuity_interval};
use wcoda_core::error::CodaError;
use wcoda_core::evaluation::{BacktestPlan, MethodConfig, SelectionCriterion};
use wcoda_core::fixtures::{
    gaussian_rank1_surface, regime_change_surface, stationary_surface, SyntheticSpec,
};
use wcoda_core::lifetable::{
    derive_death_counts, gini_coefficient, life_expectancy_at_birth, parse_life_table,
    LifeTableSeries, MortalityInputs, ParseOptions, Sex, TableFormat,
};
use wcoda_core::pipeline::{fit_pipeline, PipelineFit};
use wcoda_core::uncertainty::prediction_band;
use wcoda_core::wfpca::{KRule, ScoreBasis};

fn to_py_err(err: CodaError) -> PyErr {
    match err {
        CodaError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_sex(label: &str) -> PyResult<Sex> {
    label.parse().map_err(to_py_err)
}

fn parse_basis(label: &str) -> PyResult<ScoreBasis> {
    match label {
        "unweighted" => Ok(ScoreBasis::Unweighted),
        "weighted" => Ok(ScoreBasis::Weighted),
        other => Err(PyValueError::new_err(format!(
            "unknown score basis '{other}' (expected 'unweighted' or 'weighted')"
        ))),
    }
}

fn matrix_rows(matrix: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..matrix.nrows())
        .map(|r| matrix.row(r).iter().copied().collect())
        .collect()
}

/// A series of yearly death-count curves under a fixed radix.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct LifeTable {
    inner: LifeTableSeries,
}

#[pymethods]
impl LifeTable {
    /// Reads a table from disk. `format` is one of `csv`, `hmd_qx`,
    /// `hmd_deaths`; probabilities are converted to death counts.
    #[staticmethod]
    #[pyo3(signature = (path, format = "csv", sex = "total", radix = 100_000.0))]
    fn read_csv(path: PathBuf, format: &str, sex: &str, radix: f64) -> PyResult<Self> {
        let format = match format {
            "csv" => TableFormat::Csv,
            "hmd_qx" => TableFormat::HmdQx,
            "hmd_deaths" => TableFormat::HmdDeaths,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown format '{other}' (expected csv, hmd_qx, or hmd_deaths)"
                )))
            }
        };
        let opts = ParseOptions {
            sex: parse_sex(sex)?,
            radix,
        };
        let file = fs::File::open(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let parsed =
            parse_life_table(std::io::BufReader::new(file), format, &opts).map_err(to_py_err)?;
        Ok(Self {
            inner: parsed.into_series().map_err(to_py_err)?,
        })
    }

    /// Builds a table from death probabilities, one row per year.
    #[staticmethod]
    #[pyo3(signature = (years, qx, radix = 100_000.0, sex = "total"))]
    fn from_qx(years: Vec<i32>, qx: Vec<Vec<f64>>, radix: f64, sex: &str) -> PyResult<Self> {
        let inputs = MortalityInputs::new(
            years,
            (0..qx.first().map(|r| r.len()).unwrap_or(0) as u32).collect(),
            rows_to_matrix(&qx)?,
            radix,
            parse_sex(sex)?,
        )
        .map_err(to_py_err)?;
        Ok(Self {
            inner: derive_death_counts(&inputs).map_err(to_py_err)?,
        })
    }

    /// Builds a table from raw death counts, repairing zero cells.
    #[staticmethod]
    #[pyo3(signature = (years, counts, radix = 100_000.0, sex = "total"))]
    fn from_counts(years: Vec<i32>, counts: Vec<Vec<f64>>, radix: f64, sex: &str) -> PyResult<Self> {
        let ages = (0..counts.first().map(|r| r.len()).unwrap_or(0) as u32).collect();
        let inner = LifeTableSeries::from_raw_counts(
            years,
            ages,
            rows_to_matrix(&counts)?,
            radix,
            parse_sex(sex)?,
        )
        .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// One of the bundled synthetic surfaces: `stationary`,
    /// `regime_change`, or `gaussian`.
    #[staticmethod]
    #[pyo3(signature = (kind, years = 60, seed = 42, start_year = 1961, recent = 18))]
    fn synthetic(kind: &str, years: usize, seed: u64, start_year: i32, recent: usize) -> PyResult<Self> {
        let spec = SyntheticSpec {
            years,
            start_year,
            seed,
            ..SyntheticSpec::default()
        };
        let inner = match kind {
            "stationary" => stationary_surface(&spec),
            "regime_change" => regime_change_surface(&spec, recent),
            "gaussian" => gaussian_rank1_surface(&spec),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown kind '{other}' (expected stationary, regime_change, or gaussian)"
                )))
            }
        };
        Ok(Self { inner })
    }

    fn years(&self) -> Vec<i32> {
        self.inner.years().to_vec()
    }

    fn ages(&self) -> Vec<u32> {
        self.inner.ages().to_vec()
    }

    fn counts(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.inner.counts())
    }

    fn radix(&self) -> f64 {
        self.inner.radix()
    }

    /// Concentration of the age-at-death distribution for one year.
    fn gini(&self, year: i32) -> PyResult<f64> {
        let idx = self.year_index(year)?;
        gini_coefficient(&self.inner.year_curve(idx)).map_err(to_py_err)
    }

    /// Period life expectancy at birth for one year.
    fn life_expectancy(&self, year: i32) -> PyResult<f64> {
        let idx = self.year_index(year)?;
        life_expectancy_at_birth(&self.inner.year_curve(idx), self.inner.radix())
            .map_err(to_py_err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = fs::File::create(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.inner
            .write_csv(BufWriter::new(file))
            .map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "LifeTable({} years {}..{}, {} ages, radix {})",
            self.inner.n_years(),
            self.inner.first_year(),
            self.inner.last_year(),
            self.inner.n_ages(),
            self.inner.radix()
        )
    }
}

impl LifeTable {
    fn year_index(&self, year: i32) -> PyResult<usize> {
        self.inner
            .year_index(year)
            .ok_or_else(|| PyValueError::new_err(format!("year {year} outside the series")))
    }
}

/// Lower and upper band curves, one row per horizon.
type BandCurves = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("empty matrix"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

/// Normalized geometrically decaying weights for a series of length `n`.
#[pyfunction]
fn make_weights(kappa: f64, n: usize) -> PyResult<Vec<f64>> {
    Ok(wcoda_core::weighting::make_weights(kappa, n)
        .map_err(to_py_err)?
        .weights()
        .to_vec())
}

/// Symmetrized discrete Kullback-Leibler divergence.
#[pyfunction]
fn kld(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    wcoda_core::evaluation::kld(&p, &q).map_err(to_py_err)
}

/// Jensen-Shannon divergence with a `simple` or `geometric` mean.
#[pyfunction]
#[pyo3(signature = (p, q, mean = "simple"))]
fn jsd(p: Vec<f64>, q: Vec<f64>, mean: &str) -> PyResult<f64> {
    let rule = match mean {
        "simple" => wcoda_core::evaluation::MeanRule::Simple,
        "geometric" => wcoda_core::evaluation::MeanRule::Geometric,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown mean '{other}' (expected 'simple' or 'geometric')"
            )))
        }
    };
    wcoda_core::evaluation::jsd(&p, &q, rule).map_err(to_py_err)
}

/// A fitted transform and component model over one table.
#[pyclass]
struct Pipeline {
    fit: PipelineFit,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (table, kappa = 0.0, k = 6, evr = false, score_basis = "unweighted"))]
    fn new(table: &LifeTable, kappa: f64, k: usize, evr: bool, score_basis: &str) -> PyResult<Self> {
        let k_rule = if evr {
            KRule::Evr { max_k: None }
        } else {
            KRule::Fixed(k)
        };
        let fit = fit_pipeline(&table.inner, kappa, k_rule, parse_basis(score_basis)?)
            .map_err(to_py_err)?;
        Ok(Self { fit })
    }

    /// The weighted geometric mean curve over ages.
    fn alpha(&self) -> Vec<f64> {
        self.fit.decomp.alpha().iter().copied().collect()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.fit.model.eigenvalues().to_vec()
    }

    fn eigenfunctions(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.fit.model.eigenfunctions())
    }

    fn scores(&self) -> Vec<Vec<f64>> {
        matrix_rows(self.fit.model.scores())
    }

    /// Point forecast curves for horizons 1..=horizons, each closed to
    /// the radix.
    fn forecast(&self, horizons: usize) -> PyResult<Vec<Vec<f64>>> {
        let fc = self.fit.forecast(horizons).map_err(to_py_err)?;
        Ok(matrix_rows(fc.curves()))
    }

    /// Pointwise bootstrap band: (lower, upper) curves per horizon.
    #[pyo3(signature = (horizons, nu = 0.2, replicates = 1000, seed = 0))]
    fn prediction_intervals(
        &self,
        horizons: usize,
        nu: f64,
        replicates: usize,
        seed: u64,
    ) -> PyResult<BandCurves> {
        let ensemble = self
            .fit
            .bootstrap(horizons, replicates, seed)
            .map_err(to_py_err)?;
        let band = prediction_band(&ensemble, nu).map_err(to_py_err)?;
        Ok((matrix_rows(band.lower()), matrix_rows(band.upper())))
    }

    /// Point price of a temporary immediate annuity.
    #[pyo3(signature = (age, maturity, rate = 0.03))]
    fn annuity_price(&self, age: u32, maturity: u32, rate: f64) -> PyResult<f64> {
        let fc = self.fit.forecast(maturity as usize).map_err(to_py_err)?;
        Ok(price_annuity(&fc, age, maturity, rate)
            .map_err(to_py_err)?
            .price)
    }

    /// Median price and bootstrap interval: returns (price, lower, upper).
    #[pyo3(signature = (age, maturity, rate = 0.03, nu = 0.05, replicates = 1000, seed = 0))]
    fn annuity_interval(
        &self,
        age: u32,
        maturity: u32,
        rate: f64,
        nu: f64,
        replicates: usize,
        seed: u64,
    ) -> PyResult<(f64, f64, f64)> {
        let ensemble = self
            .fit
            .bootstrap(maturity as usize, replicates, seed)
            .map_err(to_py_err)?;
        let quote =
            price_annuity_interval(&ensemble, age, maturity, rate, nu).map_err(to_py_err)?;
        let (lower, upper) = quote.interval.expect("interval requested");
        Ok((quote.price, lower, upper))
    }
}

/// Per-horizon decay parameters minimizing a divergence on the
/// validation segment of the split.
#[pyfunction]
#[pyo3(signature = (
    table, train_end, validation_end, test_end,
    criterion = "kld", grid = None, k = 6, max_horizon = 10
))]
#[allow(clippy::too_many_arguments)]
fn select_kappa(
    table: &LifeTable,
    train_end: i32,
    validation_end: i32,
    test_end: i32,
    criterion: &str,
    grid: Option<Vec<f64>>,
    k: usize,
    max_horizon: usize,
) -> PyResult<Vec<f64>> {
    let plan = BacktestPlan::new(train_end, validation_end, test_end, max_horizon)
        .map_err(to_py_err)?;
    let criterion = match criterion {
        "kld" => SelectionCriterion::Kld,
        "jsd_simple" => SelectionCriterion::JsdSimple,
        "jsd_geometric" => SelectionCriterion::JsdGeometric,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown criterion '{other}' \
                 (expected kld, jsd_simple, or jsd_geometric)"
            )))
        }
    };
    let grid = grid.unwrap_or_else(wcoda_core::weighting::default_kappa_grid);
    let config = MethodConfig {
        k_rule: KRule::Fixed(k),
        ..MethodConfig::default()
    };
    wcoda_core::evaluation::select_kappa(&table.inner, &plan, criterion, &grid, &config)
        .map_err(to_py_err)
}

#[pymodule]
fn wcoda_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<LifeTable>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(make_weights, m)?)?;
    m.add_function(wrap_pyfunction!(kld, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(select_kappa, m)?)?;
    Ok(())
}
