//! Life-table ingestion, derivation, and summary statistics.
//!
//! Death counts are stored as a years-by-ages matrix under a fixed radix:
//! each year's counts describe how a synthetic cohort of `radix` births is
//! distributed over ages at death. Raw tables often contain zero cells at
//! the oldest ages; because the downstream log-ratio transform needs
//! strictly positive counts, construction floors tiny cells at
//! [`ZERO_FLOOR`] and renormalizes each year back to the radix.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CodaError, Result};

/// Canonical number of single-year age groups (0, 1, ..., 109, 110+).
pub const CANONICAL_AGES: usize = 111;

/// Canonical life-table radix.
pub const DEFAULT_RADIX: f64 = 100_000.0;

/// Cells below this value are raised to it during repair.
pub const ZERO_FLOOR: f64 = 1e-6;

/// Relative tolerance for the row-sum-equals-radix invariant.
pub const ROW_SUM_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
    Total,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sex::Female => write!(f, "female"),
            Sex::Male => write!(f, "male"),
            Sex::Total => write!(f, "total"),
        }
    }
}

impl std::str::FromStr for Sex {
    type Err = CodaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Sex::Female),
            "male" | "m" => Ok(Sex::Male),
            "total" | "t" => Ok(Sex::Total),
            other => Err(CodaError::domain(format!("unknown sex label '{other}'"))),
        }
    }
}

/// Death probabilities by year and age, radix attached.
///
/// The last age is treated as a closed interval: its probability of dying
/// is forced to one so every cohort member dies within the table.
#[derive(Debug, Clone)]
pub struct MortalityInputs {
    years: Vec<i32>,
    ages: Vec<u32>,
    qx: DMatrix<f64>,
    radix: f64,
    sex: Sex,
}

impl MortalityInputs {
    pub fn new(
        years: Vec<i32>,
        ages: Vec<u32>,
        mut qx: DMatrix<f64>,
        radix: f64,
        sex: Sex,
    ) -> Result<Self> {
        validate_axes(&years, &ages, qx.nrows(), qx.ncols())?;
        if !(radix > 0.0) {
            return Err(CodaError::domain(format!("radix must be positive, got {radix}")));
        }
        for t in 0..qx.nrows() {
            for (i, &age) in ages.iter().enumerate() {
                let q = qx[(t, i)];
                if !(0.0..=1.0).contains(&q) || q.is_nan() {
                    return Err(CodaError::domain(format!(
                        "death probability out of [0, 1] at year {}, age {}: {q}",
                        years[t], age
                    )));
                }
            }
            // Close the table at the terminal age.
            qx[(t, ages.len() - 1)] = 1.0;
        }
        Ok(Self { years, ages, qx, radix, sex })
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn qx(&self) -> &DMatrix<f64> {
        &self.qx
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }
}

/// A series of yearly death-count curves over a common age grid.
#[derive(Debug, Clone)]
pub struct LifeTableSeries {
    years: Vec<i32>,
    ages: Vec<u32>,
    counts: DMatrix<f64>,
    radix: f64,
    sex: Sex,
    repaired_cells: usize,
}

impl LifeTableSeries {
    /// Builds a series from raw counts, repairing zero or near-zero cells.
    ///
    /// Every cell below [`ZERO_FLOOR`] is raised to the floor, then each
    /// row is rescaled to sum to the radix exactly. The number of floored
    /// cells is recorded in [`LifeTableSeries::repaired_cells`].
    pub fn from_raw_counts(
        years: Vec<i32>,
        ages: Vec<u32>,
        mut counts: DMatrix<f64>,
        radix: f64,
        sex: Sex,
    ) -> Result<Self> {
        validate_axes(&years, &ages, counts.nrows(), counts.ncols())?;
        if !(radix > 0.0) {
            return Err(CodaError::domain(format!("radix must be positive, got {radix}")));
        }
        let mut repaired = 0usize;
        for t in 0..counts.nrows() {
            for i in 0..counts.ncols() {
                let c = counts[(t, i)];
                if c.is_nan() || c < 0.0 {
                    return Err(CodaError::domain(format!(
                        "negative or undefined count at year {}, age {}: {c}",
                        years[t], ages[i]
                    )));
                }
                if c < ZERO_FLOOR {
                    counts[(t, i)] = ZERO_FLOOR;
                    repaired += 1;
                }
            }
            let row_sum: f64 = counts.row(t).iter().sum();
            if !(row_sum > 0.0) {
                return Err(CodaError::domain(format!(
                    "year {} has no mass to normalize",
                    years[t]
                )));
            }
            let scale = radix / row_sum;
            for i in 0..counts.ncols() {
                counts[(t, i)] *= scale;
            }
        }
        let series = Self {
            years,
            ages,
            counts,
            radix,
            sex,
            repaired_cells: repaired,
        };
        series.validate()?;
        Ok(series)
    }

    /// Validates the positivity and row-sum invariants.
    fn validate(&self) -> Result<()> {
        for t in 0..self.counts.nrows() {
            let mut row_sum = 0.0;
            for i in 0..self.counts.ncols() {
                let c = self.counts[(t, i)];
                if !(c > 0.0) {
                    return Err(CodaError::domain(format!(
                        "non-positive count at year {}, age {}",
                        self.years[t], self.ages[i]
                    )));
                }
                row_sum += c;
            }
            if (row_sum - self.radix).abs() > ROW_SUM_RTOL * self.radix {
                return Err(CodaError::domain(format!(
                    "year {} sums to {row_sum}, expected radix {}",
                    self.years[t], self.radix
                )));
            }
        }
        Ok(())
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn counts(&self) -> &DMatrix<f64> {
        &self.counts
    }

    pub fn radix(&self) -> f64 {
        self.radix
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }

    pub fn repaired_cells(&self) -> usize {
        self.repaired_cells
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn n_ages(&self) -> usize {
        self.ages.len()
    }

    pub fn first_year(&self) -> i32 {
        self.years[0]
    }

    pub fn last_year(&self) -> i32 {
        *self.years.last().expect("non-empty years")
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        if year < self.first_year() || year > self.last_year() {
            None
        } else {
            Some((year - self.first_year()) as usize)
        }
    }

    /// One year's curve as a plain vector.
    pub fn year_curve(&self, index: usize) -> Vec<f64> {
        self.counts.row(index).iter().copied().collect()
    }

    /// Sub-series covering `from..=to` (inclusive calendar years).
    pub fn window(&self, from: i32, to: i32) -> Result<LifeTableSeries> {
        let lo = self
            .year_index(from)
            .ok_or_else(|| CodaError::domain(format!("year {from} outside the series")))?;
        let hi = self
            .year_index(to)
            .ok_or_else(|| CodaError::domain(format!("year {to} outside the series")))?;
        if lo > hi {
            return Err(CodaError::domain(format!("empty window {from}..{to}")));
        }
        Ok(LifeTableSeries {
            years: self.years[lo..=hi].to_vec(),
            ages: self.ages.clone(),
            counts: self.counts.rows(lo, hi - lo + 1).into_owned(),
            radix: self.radix,
            sex: self.sex,
            repaired_cells: self.repaired_cells,
        })
    }

    /// Writes the canonical `year,age,count` layout with six decimals.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "year,age,count")?;
        for (t, &year) in self.years.iter().enumerate() {
            for (i, &age) in self.ages.iter().enumerate() {
                writeln!(w, "{year},{age},{:.6}", self.counts[(t, i)])?;
            }
        }
        Ok(())
    }
}

fn validate_axes(years: &[i32], ages: &[u32], nrows: usize, ncols: usize) -> Result<()> {
    if years.is_empty() || ages.is_empty() {
        return Err(CodaError::structure("empty year or age axis"));
    }
    if years.len() != nrows || ages.len() != ncols {
        return Err(CodaError::structure(format!(
            "axis lengths ({}, {}) do not match matrix shape ({nrows}, {ncols})",
            years.len(),
            ages.len()
        )));
    }
    for pair in years.windows(2) {
        if pair[1] != pair[0] + 1 {
            return Err(CodaError::structure(format!(
                "years must be consecutive, found {} followed by {}",
                pair[0], pair[1]
            )));
        }
    }
    if ages[0] != 0 {
        return Err(CodaError::structure("age axis must start at 0"));
    }
    for (i, &age) in ages.iter().enumerate() {
        if age != i as u32 {
            return Err(CodaError::structure(format!(
                "ages must be contiguous from 0, found {age} at position {i}"
            )));
        }
    }
    Ok(())
}

/// Supported input layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    /// Wide text with `Year Age Female Male Total` columns of death counts.
    HmdDeaths,
    /// Same layout with death probabilities instead of counts.
    HmdQx,
    /// Long CSV: header `year,age,value` for probabilities or
    /// `year,age,count` for death counts.
    Csv,
}

/// Result of parsing: either probabilities to derive from, or counts.
#[derive(Debug, Clone)]
pub enum ParsedTable {
    Inputs(MortalityInputs),
    Series(LifeTableSeries),
}

impl ParsedTable {
    /// Death counts, deriving them from probabilities if necessary.
    pub fn into_series(self) -> Result<LifeTableSeries> {
        match self {
            ParsedTable::Series(s) => Ok(s),
            ParsedTable::Inputs(inputs) => derive_death_counts(&inputs),
        }
    }
}

/// Options controlling column selection and table construction.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub sex: Sex,
    pub radix: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            sex: Sex::Total,
            radix: DEFAULT_RADIX,
        }
    }
}

/// Parses a life-table text stream in one of the supported layouts.
pub fn parse_life_table(
    reader: impl BufRead,
    format: TableFormat,
    opts: &ParseOptions,
) -> Result<ParsedTable> {
    match format {
        TableFormat::HmdDeaths => {
            let cells = parse_hmd_wide(reader, opts.sex)?;
            let (years, ages, matrix) = assemble_grid(cells)?;
            Ok(ParsedTable::Series(LifeTableSeries::from_raw_counts(
                years, ages, matrix, opts.radix, opts.sex,
            )?))
        }
        TableFormat::HmdQx => {
            let cells = parse_hmd_wide(reader, opts.sex)?;
            let (years, ages, matrix) = assemble_grid(cells)?;
            Ok(ParsedTable::Inputs(MortalityInputs::new(
                years, ages, matrix, opts.radix, opts.sex,
            )?))
        }
        TableFormat::Csv => parse_long_csv(reader, opts),
    }
}

/// One parsed data cell: (year, age, value) plus the source line number.
type Cell = (i32, u32, f64, usize);

fn parse_age_token(token: &str, line: usize) -> Result<u32> {
    let trimmed = token.strip_suffix('+').unwrap_or(token);
    trimmed
        .parse::<u32>()
        .map_err(|_| CodaError::parse(line, format!("invalid age token '{token}'")))
}

fn parse_value_token(token: &str, line: usize, what: &str) -> Result<f64> {
    if token == "." {
        return Err(CodaError::parse(line, format!("missing {what} value")));
    }
    let v: f64 = token
        .parse()
        .map_err(|_| CodaError::parse(line, format!("invalid {what} value '{token}'")))?;
    if v < 0.0 {
        return Err(CodaError::domain(format!(
            "negative value {v} at line {line}"
        )));
    }
    Ok(v)
}

/// Parses the wide `Year Age Female Male Total` layout.
///
/// Leading title or blank lines before the header are skipped, matching
/// the usual preamble of published mortality files.
fn parse_hmd_wide(reader: impl BufRead, sex: Sex) -> Result<Vec<Cell>> {
    let col = match sex {
        Sex::Female => 2,
        Sex::Male => 3,
        Sex::Total => 4,
    };
    let mut cells = Vec::new();
    let mut header_seen = false;
    for (lineno0, line) in reader.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if !header_seen {
            if fields[0].eq_ignore_ascii_case("year") {
                header_seen = true;
            }
            continue;
        }
        if fields.len() < 5 {
            return Err(CodaError::parse(
                lineno,
                format!("expected 5 columns, found {}", fields.len()),
            ));
        }
        let year: i32 = fields[0]
            .parse()
            .map_err(|_| CodaError::parse(lineno, format!("invalid year '{}'", fields[0])))?;
        let age = parse_age_token(fields[1], lineno)?;
        let value = parse_value_token(fields[col], lineno, "data")?;
        cells.push((year, age, value, lineno));
    }
    if !header_seen {
        return Err(CodaError::parse(1, "no 'Year Age ...' header found"));
    }
    if cells.is_empty() {
        return Err(CodaError::structure("no data rows found"));
    }
    Ok(cells)
}

/// Parses the long `year,age,value|count` layout, dispatching on the header.
fn parse_long_csv(reader: impl BufRead, opts: &ParseOptions) -> Result<ParsedTable> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, Ok(line))) if line.trim().is_empty() => continue,
            Some((_, Ok(line))) => break line,
            Some((_, Err(e))) => return Err(e.into()),
            None => return Err(CodaError::parse(1, "empty input")),
        }
    };
    let columns: Vec<String> = header
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    let is_counts = match columns.as_slice() {
        [y, a, v] if y == "year" && a == "age" && v == "value" => false,
        [y, a, c] if y == "year" && a == "age" && c == "count" => true,
        _ => {
            return Err(CodaError::parse(
                1,
                format!("expected header 'year,age,value' or 'year,age,count', got '{header}'"),
            ))
        }
    };

    let mut cells = Vec::new();
    for (lineno0, line) in lines {
        let lineno = lineno0 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != 3 {
            return Err(CodaError::parse(
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let year: i32 = fields[0]
            .parse()
            .map_err(|_| CodaError::parse(lineno, format!("invalid year '{}'", fields[0])))?;
        let age = parse_age_token(fields[1], lineno)?;
        let value = parse_value_token(fields[2], lineno, "data")?;
        cells.push((year, age, value, lineno));
    }
    if cells.is_empty() {
        return Err(CodaError::structure("no data rows found"));
    }
    let (years, ages, matrix) = assemble_grid(cells)?;
    if is_counts {
        Ok(ParsedTable::Series(LifeTableSeries::from_raw_counts(
            years, ages, matrix, opts.radix, opts.sex,
        )?))
    } else {
        Ok(ParsedTable::Inputs(MortalityInputs::new(
            years, ages, matrix, opts.radix, opts.sex,
        )?))
    }
}

/// Pivots (year, age, value) cells into a dense year-by-age matrix,
/// checking that the grid is complete and the axes are valid.
fn assemble_grid(cells: Vec<Cell>) -> Result<(Vec<i32>, Vec<u32>, DMatrix<f64>)> {
    let mut years: Vec<i32> = cells.iter().map(|c| c.0).collect();
    years.sort_unstable();
    years.dedup();
    let mut ages: Vec<u32> = cells.iter().map(|c| c.1).collect();
    ages.sort_unstable();
    ages.dedup();

    for pair in years.windows(2) {
        if pair[1] != pair[0] + 1 {
            return Err(CodaError::structure(format!(
                "years must be consecutive, found {} followed by {}",
                pair[0], pair[1]
            )));
        }
    }

    let year0 = years[0];
    let n_ages = ages.len();
    let mut matrix = DMatrix::from_element(years.len(), n_ages, f64::NAN);
    for (year, age, value, lineno) in cells {
        let t = (year - year0) as usize;
        let i = ages.binary_search(&age).expect("age present by construction");
        if !matrix[(t, i)].is_nan() {
            return Err(CodaError::parse(
                lineno,
                format!("duplicate cell for year {year}, age {age}"),
            ));
        }
        matrix[(t, i)] = value;
    }
    for (t, &year) in years.iter().enumerate() {
        for (i, &age) in ages.iter().enumerate() {
            if matrix[(t, i)].is_nan() {
                return Err(CodaError::structure(format!(
                    "missing cell for year {year}, age {age}"
                )));
            }
        }
    }
    Ok((years, ages, matrix))
}

/// Rebuilds death counts from death probabilities and the radix.
///
/// For each year, survivorship starts at the radix and each age removes
/// `l * q`; the closed terminal age absorbs the remaining survivors. Cells
/// that still end up below [`ZERO_FLOOR`] (possible whenever some `q` is
/// zero) are repaired during construction.
pub fn derive_death_counts(inputs: &MortalityInputs) -> Result<LifeTableSeries> {
    let n_years = inputs.years.len();
    let n_ages = inputs.ages.len();
    let mut counts = DMatrix::zeros(n_years, n_ages);
    for t in 0..n_years {
        let mut alive = inputs.radix;
        for i in 0..n_ages {
            let d = alive * inputs.qx[(t, i)];
            counts[(t, i)] = d;
            alive -= d;
        }
    }
    LifeTableSeries::from_raw_counts(
        inputs.years.clone(),
        inputs.ages.clone(),
        counts,
        inputs.radix,
        inputs.sex,
    )
}

/// Discrete Gini coefficient of one year's age-at-death distribution.
///
/// Shares are sorted ascending and the Lorenz polyline is integrated by
/// the trapezoid rule over the population fractions, giving
/// `G = 2 * integral(p - L(p))`. A value near one means deaths concentrate
/// at a single age; zero means deaths are spread evenly over all ages.
pub fn gini_coefficient(d: &[f64]) -> Result<f64> {
    if d.is_empty() {
        return Err(CodaError::domain("empty death-count vector"));
    }
    if d.iter().any(|&x| x < 0.0 || x.is_nan()) {
        return Err(CodaError::domain("death counts must be nonnegative"));
    }
    let total: f64 = d.iter().sum();
    if !(total > 0.0) {
        return Err(CodaError::domain("death counts sum to zero"));
    }
    let mut shares: Vec<f64> = d.iter().map(|&x| x / total).collect();
    shares.sort_by(|a, b| a.partial_cmp(b).expect("no NaN after validation"));
    let n = shares.len() as f64;
    // G = 1 - (1/N) * sum_i (L_{i-1} + L_i) by the trapezoid rule.
    let mut cumulative = 0.0;
    let mut trapezoid_sum = 0.0;
    for share in shares {
        let prev = cumulative;
        cumulative += share;
        trapezoid_sum += prev + cumulative;
    }
    Ok(1.0 - trapezoid_sum / n)
}

/// Period life expectancy at birth from one year's death counts.
///
/// Deaths within the age interval `[x, x+1)` are placed at its midpoint.
pub fn life_expectancy_at_birth(d: &[f64], radix: f64) -> Result<f64> {
    if d.is_empty() {
        return Err(CodaError::domain("empty death-count vector"));
    }
    let total: f64 = d.iter().sum();
    if (total - radix).abs() > ROW_SUM_RTOL * radix {
        return Err(CodaError::domain(format!(
            "death counts sum to {total}, expected radix {radix}"
        )));
    }
    let weighted: f64 = d
        .iter()
        .enumerate()
        .map(|(x, &dx)| (x as f64 + 0.5) * dx)
        .sum();
    Ok(weighted / radix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Cursor;

    fn qx_csv() -> &'static str {
        "year,age,value\n\
         2000,0,0.01\n2000,1,0.002\n2000,2,0.5\n2000,3,0.9\n\
         2001,0,0.011\n2001,1,0.002\n2001,2,0.5\n2001,3,0.9\n\
         2002,0,0.012\n2002,1,0.002\n2002,2,0.5\n2002,3,0.9\n"
    }

    #[test]
    fn csv_qx_parses_with_shape_preserved() {
        let parsed = parse_life_table(
            Cursor::new(qx_csv()),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap();
        match parsed {
            ParsedTable::Inputs(inputs) => {
                assert_eq!(inputs.years(), &[2000, 2001, 2002]);
                assert_eq!(inputs.ages(), &[0, 1, 2, 3]);
                assert_eq!(inputs.qx().shape(), (3, 4));
                // terminal age closed regardless of the stated value
                assert_eq!(inputs.qx()[(0, 3)], 1.0);
            }
            ParsedTable::Series(_) => panic!("qx input should parse as probabilities"),
        }
    }

    #[test]
    fn terminal_age_token_accepted() {
        let text = "Sweden, deaths\n\nYeared\nYear Age Female Male Total\n\
                    1999 0 10.0 12.0 22.0\n1999 110+ 1.0 1.0 2.0\n";
        // ages 0 and 110 are not contiguous, so parsing the grid fails,
        // but the age token itself must map to 110
        let err = parse_life_table(
            Cursor::new(text),
            TableFormat::HmdDeaths,
            &ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CodaError::Structure(_)));
        assert_eq!(parse_age_token("110+", 1).unwrap(), 110);
    }

    #[test]
    fn hmd_wide_selects_sex_column() {
        let text = "Year Age Female Male Total\n\
                    1999 0 10.0 20.0 30.0\n1999 1 5.0 6.0 11.0\n1999 2 1.0 2.0 3.0\n";
        let opts = ParseOptions {
            sex: Sex::Male,
            radix: 28.0,
        };
        let parsed = parse_life_table(Cursor::new(text), TableFormat::HmdDeaths, &opts).unwrap();
        match parsed {
            ParsedTable::Series(series) => {
                assert_eq!(series.n_ages(), 3);
                assert_relative_eq!(series.counts()[(0, 0)], 20.0, max_relative = 1e-12);
                assert_relative_eq!(series.counts()[(0, 2)], 2.0, max_relative = 1e-12);
            }
            _ => panic!("deaths input should parse as a series"),
        }
    }

    #[test]
    fn year_gap_is_structural_error() {
        let text = "year,age,value\n1800,0,0.5\n1800,1,1.0\n1802,0,0.5\n1802,1,1.0\n";
        let err = parse_life_table(
            Cursor::new(text),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CodaError::Structure(_)), "got {err:?}");
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let text = "year,age,value\n2000,0,0.1\n2000,1,oops\n";
        let err = parse_life_table(
            Cursor::new(text),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap_err();
        match err {
            CodaError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_value_rejected_with_line() {
        let text = "Year Age Female Male Total\n2000 0 1.0 . 1.0\n";
        let opts = ParseOptions {
            sex: Sex::Male,
            ..ParseOptions::default()
        };
        let err = parse_life_table(Cursor::new(text), TableFormat::HmdDeaths, &opts).unwrap_err();
        assert!(matches!(err, CodaError::Parse { line: 2, .. }));
    }

    #[test]
    fn negative_value_is_domain_error() {
        let text = "year,age,count\n2000,0,-5.0\n2000,1,10.0\n";
        let err = parse_life_table(
            Cursor::new(text),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CodaError::Domain(_)));
    }

    #[test]
    fn derive_matches_hand_product() {
        let inputs = MortalityInputs::new(
            vec![2000],
            vec![0, 1, 2],
            DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 1.0]),
            100_000.0,
            Sex::Total,
        )
        .unwrap();
        let series = derive_death_counts(&inputs).unwrap();
        assert_relative_eq!(series.counts()[(0, 0)], 50_000.0, max_relative = 1e-12);
        assert_relative_eq!(series.counts()[(0, 1)], 25_000.0, max_relative = 1e-12);
        assert_relative_eq!(series.counts()[(0, 2)], 25_000.0, max_relative = 1e-12);
    }

    #[test]
    fn terminal_age_absorbs_survivors() {
        let inputs = MortalityInputs::new(
            vec![2000],
            vec![0, 1, 2],
            DMatrix::from_row_slice(1, 3, &[0.1, 0.0, 1.0]),
            1000.0,
            Sex::Total,
        )
        .unwrap();
        let series = derive_death_counts(&inputs).unwrap();
        // q = 0 at age 1 leaves a zero cell that gets floored and the row
        // renormalized, so the terminal count stays within tolerance of
        // the surviving 900.
        assert_relative_eq!(series.counts()[(0, 2)], 900.0, max_relative = 1e-6);
        assert_eq!(series.repaired_cells(), 1);
    }

    /// Independent survivorship recursion used as an oracle.
    fn survivorship_oracle(q: &[f64], radix: f64) -> Vec<f64> {
        let mut l = radix;
        let mut d = Vec::with_capacity(q.len());
        for &qi in q {
            d.push(l * qi);
            l *= 1.0 - qi;
        }
        d
    }

    #[test]
    fn derive_matches_recursion_oracle() {
        let q = [0.0123, 0.2, 0.05, 0.31, 1.0];
        let inputs = MortalityInputs::new(
            vec![1990],
            vec![0, 1, 2, 3, 4],
            DMatrix::from_row_slice(1, 5, &q),
            100_000.0,
            Sex::Female,
        )
        .unwrap();
        let series = derive_death_counts(&inputs).unwrap();
        let expected = survivorship_oracle(&q, 100_000.0);
        for (i, &e) in expected.iter().enumerate() {
            assert_relative_eq!(series.counts()[(0, i)], e, max_relative = 1e-9);
        }
    }

    #[test]
    fn rows_conserve_mass() {
        let parsed = parse_life_table(
            Cursor::new(qx_csv()),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap();
        let series = parsed.into_series().unwrap();
        for t in 0..series.n_years() {
            let sum: f64 = series.year_curve(t).iter().sum();
            assert_relative_eq!(sum, series.radix(), max_relative = 1e-9);
        }
    }

    #[test]
    fn qx_outside_unit_interval_rejected() {
        let err = MortalityInputs::new(
            vec![2000],
            vec![0, 1],
            DMatrix::from_row_slice(1, 2, &[1.5, 1.0]),
            1000.0,
            Sex::Total,
        )
        .unwrap_err();
        assert!(matches!(err, CodaError::Domain(_)));
    }

    /// Exhaustive Lorenz-curve computation used as an oracle.
    fn gini_oracle(d: &[f64]) -> f64 {
        let total: f64 = d.iter().sum();
        let mut shares: Vec<f64> = d.iter().map(|&x| x / total).collect();
        shares.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = shares.len();
        let mut lorenz = vec![0.0; n + 1];
        for i in 0..n {
            lorenz[i + 1] = lorenz[i] + shares[i];
        }
        let mut integral = 0.0;
        for i in 1..=n {
            let p_prev = (i - 1) as f64 / n as f64;
            let p_curr = i as f64 / n as f64;
            integral +=
                ((p_prev - lorenz[i - 1]) + (p_curr - lorenz[i])) / 2.0 * (1.0 / n as f64);
        }
        2.0 * integral
    }

    #[test]
    fn gini_point_mass_near_one() {
        let mut d = vec![0.0; 111];
        d[40] = 5000.0;
        let g = gini_coefficient(&d).unwrap();
        assert_relative_eq!(g, 1.0 - 1.0 / 111.0, max_relative = 1e-12);
        assert_relative_eq!(g, gini_oracle(&d), max_relative = 1e-12);
    }

    #[test]
    fn gini_uniform_is_zero() {
        let d = vec![3.0; 111];
        assert_relative_eq!(gini_coefficient(&d).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gini_two_point_masses_matches_oracle() {
        let mut d = vec![0.0; 111];
        d[10] = 7.0;
        d[90] = 7.0;
        let g = gini_coefficient(&d).unwrap();
        assert_relative_eq!(g, gini_oracle(&d), max_relative = 1e-12);
        assert_relative_eq!(g, 1.0 - 2.0 / 111.0, max_relative = 1e-12);
    }

    #[test]
    fn gini_scale_invariant() {
        let d: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin().abs() + 0.1).collect();
        // power-of-two scaling is exact in floating point
        let doubled: Vec<f64> = d.iter().map(|&x| 64.0 * x).collect();
        assert_eq!(
            gini_coefficient(&d).unwrap(),
            gini_coefficient(&doubled).unwrap()
        );
        let scaled: Vec<f64> = d.iter().map(|&x| 73.5 * x).collect();
        assert_relative_eq!(
            gini_coefficient(&d).unwrap(),
            gini_coefficient(&scaled).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gini_rejects_zero_vector() {
        assert!(gini_coefficient(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn e0_point_mass() {
        let mut d = vec![0.0; 111];
        d[80] = 1000.0;
        assert_relative_eq!(
            life_expectancy_at_birth(&d, 1000.0).unwrap(),
            80.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn e0_split_mass() {
        let mut d = vec![0.0; 111];
        d[0] = 500.0;
        d[100] = 500.0;
        assert_relative_eq!(
            life_expectancy_at_birth(&d, 1000.0).unwrap(),
            50.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn e0_matches_weighted_mean_oracle() {
        let d: Vec<f64> = (0..20).map(|i| (i as f64 + 1.0) * 3.0).collect();
        let radix: f64 = d.iter().sum();
        let expected: f64 =
            d.iter().enumerate().map(|(x, &dx)| (x as f64 + 0.5) * dx).sum::<f64>() / radix;
        assert_relative_eq!(
            life_expectancy_at_birth(&d, radix).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn e0_rejects_wrong_radix() {
        let d = vec![10.0, 10.0];
        assert!(life_expectancy_at_birth(&d, 1000.0).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_counts() {
        let parsed = parse_life_table(
            Cursor::new(qx_csv()),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap();
        let series = parsed.into_series().unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let reparsed = parse_life_table(
            Cursor::new(buf),
            TableFormat::Csv,
            &ParseOptions::default(),
        )
        .unwrap();
        match reparsed {
            ParsedTable::Series(s) => {
                for t in 0..series.n_years() {
                    for i in 0..series.n_ages() {
                        assert_relative_eq!(
                            s.counts()[(t, i)],
                            series.counts()[(t, i)],
                            epsilon = 1e-4
                        );
                    }
                }
            }
            _ => panic!("canonical output should parse as counts"),
        }
    }
}
