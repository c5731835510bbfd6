//! Run configuration: one flat struct shared by every subcommand,
//! loadable from a TOML file with command-line flags taking precedence.
//! Each run writes its resolved configuration and a manifest next to its
//! outputs so results can be reproduced from the output directory alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wcoda_core::evaluation::SelectionCriterion;
use wcoda_core::lifetable::{Sex, TableFormat};
use wcoda_core::wfpca::ScoreBasis;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: TableFormat,
    pub sex: Sex,
    pub radix: f64,
    pub kappa: f64,
    pub kappa_per_horizon: Option<Vec<f64>>,
    pub kappa_grid: Option<String>,
    pub k: usize,
    pub evr: bool,
    pub max_k: Option<usize>,
    pub score_basis: ScoreBasis,
    pub horizons: usize,
    pub nu: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub plan: Option<String>,
    pub fit_start: Option<i32>,
    pub criterion: Criterion,
    pub ages: String,
    pub maturities: String,
    pub rate: f64,
    pub no_closure: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: TableFormat::Csv,
            sex: Sex::Total,
            radix: 100_000.0,
            kappa: 0.0,
            kappa_per_horizon: None,
            kappa_grid: None,
            k: 6,
            evr: false,
            max_k: None,
            score_basis: ScoreBasis::Unweighted,
            horizons: 10,
            nu: Vec::new(),
            replicates: 1000,
            seed: 0,
            plan: None,
            fit_start: None,
            criterion: Criterion::Kld,
            ages: "60:105:5".to_string(),
            maturities: "5:30:5".to_string(),
            rate: 0.03,
            no_closure: false,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Kld,
    JsdS,
    JsdG,
    Cpd,
}

impl Criterion {
    pub fn to_selection(self, nu: f64) -> SelectionCriterion {
        match self {
            Criterion::Kld => SelectionCriterion::Kld,
            Criterion::JsdS => SelectionCriterion::JsdSimple,
            Criterion::JsdG => SelectionCriterion::JsdGeometric,
            Criterion::Cpd => SelectionCriterion::Cpd { nu },
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io)?;
        toml::from_str(&text)
            .map_err(|e| CliError::parse(format!("config file {}: {e}", path.display())))
    }

    /// Resolves the input path, consulting the data directory variable
    /// for relative paths that do not exist as given.
    pub fn resolved_input(&self) -> Result<PathBuf, CliError> {
        let input = self
            .input
            .clone()
            .ok_or_else(|| CliError::parse("no input file given (use --input)"))?;
        if input.exists() || input.is_absolute() {
            return Ok(input);
        }
        if let Ok(dir) = std::env::var("WCODA_DATA_DIR") {
            let candidate = Path::new(&dir).join(&input);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
        Ok(input)
    }

    /// Parses a `lo:hi:step` range specification.
    pub fn parse_range(spec: &str) -> Result<(f64, f64, f64), CliError> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::parse(format!(
                "range '{spec}' must look like lo:hi:step"
            )));
        }
        let mut values = [0.0; 3];
        for (slot, part) in values.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| CliError::parse(format!("invalid number '{part}' in '{spec}'")))?;
        }
        Ok((values[0], values[1], values[2]))
    }

    /// Parses a `train_end:validation_end:test_end` plan specification.
    pub fn parse_plan(&self) -> Result<(i32, i32, i32), CliError> {
        let spec = self
            .plan
            .as_deref()
            .ok_or_else(|| CliError::parse("no backtest plan given (use --plan a:b:c)"))?;
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::parse(format!(
                "plan '{spec}' must look like train_end:validation_end:test_end"
            )));
        }
        let mut years = [0i32; 3];
        for (slot, part) in years.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| CliError::parse(format!("invalid year '{part}' in '{spec}'")))?;
        }
        Ok((years[0], years[1], years[2]))
    }
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub notes: ManifestNotes,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Default, Serialize)]
pub struct ManifestNotes {
    /// Cells floored during zero repair.
    pub repaired_cells: usize,
    /// Log-scale values clamped before exponentiation.
    pub clamped_values: usize,
    /// Whether forecast curves were closed to the radix.
    pub closure: bool,
}

pub fn input_digest(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path).map_err(CliError::io)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex,
    })
}

/// Writes the resolved config and the manifest into the output directory.
pub fn write_run_records(
    out_dir: &Path,
    config: &RunConfig,
    manifest: &Manifest,
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(CliError::io)?;
    let config_text =
        toml::to_string_pretty(config).map_err(|e| CliError::other(format!("config: {e}")))?;
    fs::write(out_dir.join("config.toml"), config_text).map_err(CliError::io)?;
    let manifest_text = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::other(format!("manifest: {e}")))?;
    fs::write(out_dir.join("manifest.json"), manifest_text + "\n").map_err(CliError::io)?;
    Ok(())
}
