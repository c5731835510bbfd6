//! Subcommand implementations.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use wcoda_core::annuity::{price_annuity, price_annuity_interval, AnnuityQuote};
use wcoda_core::clr::clr_inverse_raw;
use wcoda_core::evaluation::{
    expanding_window_backtest, BacktestPhase, BacktestPlan, ErrorReport, IntervalSettings,
    KappaSpec, MethodConfig,
};
use wcoda_core::fixtures::{
    gaussian_rank1_surface, regime_change_surface, stationary_surface, SyntheticSpec,
};
use wcoda_core::forecast::forecast_log_curves;
use wcoda_core::lifetable::{
    gini_coefficient, life_expectancy_at_birth, parse_life_table, LifeTableSeries, ParseOptions,
};
use wcoda_core::pipeline::{fit_pipeline, PipelineFit};
use wcoda_core::uncertainty::prediction_band;
use wcoda_core::weighting::kappa_grid;
use wcoda_core::wfpca::KRule;

use crate::config::{input_digest, write_run_records, Manifest, ManifestNotes, RunConfig};
use crate::{CliError, SynthOpts};

fn load_series(config: &RunConfig) -> Result<(LifeTableSeries, PathBuf), CliError> {
    let path = config.resolved_input()?;
    let file = fs::File::open(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let opts = ParseOptions {
        sex: config.sex,
        radix: config.radix,
    };
    let parsed = parse_life_table(reader, config.format, &opts)?;
    let series = parsed.into_series()?;
    Ok((series, path))
}

fn k_rule(config: &RunConfig) -> KRule {
    if config.evr {
        KRule::Evr {
            max_k: config.max_k,
        }
    } else {
        KRule::Fixed(config.k)
    }
}

fn fit_from_config(config: &RunConfig, series: &LifeTableSeries) -> Result<PipelineFit, CliError> {
    Ok(fit_pipeline(
        series,
        config.kappa,
        k_rule(config),
        config.score_basis,
    )?)
}

fn out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config
        .out
        .clone()
        .ok_or_else(|| CliError::parse("no output directory given (use --out)"))?;
    fs::create_dir_all(&dir).map_err(CliError::io)?;
    Ok(dir)
}

fn open_writer(dir: &Path, name: &str) -> Result<BufWriter<fs::File>, CliError> {
    let file = fs::File::create(dir.join(name)).map_err(CliError::io)?;
    Ok(BufWriter::new(file))
}

fn finish(
    dir: &Path,
    config: &RunConfig,
    command: &str,
    input: Option<&Path>,
    notes: ManifestNotes,
) -> Result<(), CliError> {
    let inputs = match input {
        Some(path) => vec![input_digest(path)?],
        None => Vec::new(),
    };
    let manifest = Manifest {
        tool: "wcoda",
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        inputs,
        seed: config.seed,
        notes,
    };
    write_run_records(dir, config, &manifest)
}

pub fn ingest(config: RunConfig) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;

    let mut table = open_writer(&dir, "table.csv")?;
    series.write_csv(&mut table)?;
    table.flush().map_err(CliError::io)?;

    let mut summary = open_writer(&dir, "summary.csv")?;
    writeln!(summary, "year,gini,life_expectancy").map_err(CliError::io)?;
    for (t, &year) in series.years().iter().enumerate() {
        let curve = series.year_curve(t);
        let gini = gini_coefficient(&curve)?;
        let e0 = life_expectancy_at_birth(&curve, series.radix())?;
        writeln!(summary, "{year},{gini:.6},{e0:.6}").map_err(CliError::io)?;
    }
    summary.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "ingest",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            closure: true,
            ..ManifestNotes::default()
        },
    )?;
    println!(
        "ingested {} years x {} ages ({} repaired cells) -> {}",
        series.n_years(),
        series.n_ages(),
        series.repaired_cells(),
        dir.display()
    );
    Ok(())
}

pub fn transform(config: RunConfig) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let scheme = wcoda_core::weighting::make_weights(config.kappa, series.n_years())?;
    let decomp = wcoda_core::clr::clr_forward(&series, &scheme)?;

    let mut alpha = open_writer(&dir, "alpha.csv")?;
    writeln!(alpha, "age,alpha").map_err(CliError::io)?;
    for (i, &age) in series.ages().iter().enumerate() {
        writeln!(alpha, "{age},{:.12e}", decomp.alpha()[i]).map_err(CliError::io)?;
    }
    alpha.flush().map_err(CliError::io)?;

    let mut beta = open_writer(&dir, "beta.csv")?;
    writeln!(beta, "year,age,beta").map_err(CliError::io)?;
    for (t, &year) in series.years().iter().enumerate() {
        for (i, &age) in series.ages().iter().enumerate() {
            writeln!(beta, "{year},{age},{:.12e}", decomp.beta()[(t, i)])
                .map_err(CliError::io)?;
        }
    }
    beta.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "transform",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            closure: true,
            ..ManifestNotes::default()
        },
    )?;
    println!("transform written -> {}", dir.display());
    Ok(())
}

pub fn fit(config: RunConfig) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let fit = fit_from_config(&config, &series)?;
    let model = &fit.model;

    let mut eigenvalues = open_writer(&dir, "eigenvalues.csv")?;
    writeln!(eigenvalues, "component,eigenvalue").map_err(CliError::io)?;
    for (k, value) in model.eigenvalues().iter().enumerate() {
        writeln!(eigenvalues, "{},{value:.12e}", k + 1).map_err(CliError::io)?;
    }
    eigenvalues.flush().map_err(CliError::io)?;

    let mut eigenfunctions = open_writer(&dir, "eigenfunctions.csv")?;
    writeln!(eigenfunctions, "component,age,value").map_err(CliError::io)?;
    for k in 0..model.k() {
        for (i, &age) in series.ages().iter().enumerate() {
            writeln!(
                eigenfunctions,
                "{},{age},{:.12e}",
                k + 1,
                model.eigenfunctions()[(k, i)]
            )
            .map_err(CliError::io)?;
        }
    }
    eigenfunctions.flush().map_err(CliError::io)?;

    let mut scores = open_writer(&dir, "scores.csv")?;
    writeln!(scores, "year,component,score").map_err(CliError::io)?;
    for (t, &year) in series.years().iter().enumerate() {
        for k in 0..model.k() {
            writeln!(scores, "{year},{},{:.12e}", k + 1, model.scores()[(t, k)])
                .map_err(CliError::io)?;
        }
    }
    scores.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "fit",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            closure: true,
            ..ManifestNotes::default()
        },
    )?;
    println!(
        "fitted {} components (basis: {:?}) -> {}",
        model.k(),
        model.basis(),
        dir.display()
    );
    Ok(())
}

fn parse_grid(config: &RunConfig) -> Result<Vec<f64>, CliError> {
    match &config.kappa_grid {
        Some(spec) => {
            let (lo, hi, step) = RunConfig::parse_range(spec)?;
            Ok(kappa_grid(lo, hi, step)?)
        }
        None => Ok(wcoda_core::weighting::default_kappa_grid()),
    }
}

fn plan_from_config(config: &RunConfig) -> Result<BacktestPlan, CliError> {
    let (train_end, validation_end, test_end) = config.parse_plan()?;
    Ok(BacktestPlan::new(
        train_end,
        validation_end,
        test_end,
        config.horizons,
    )?)
}

pub fn select_kappa(config: RunConfig) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let plan = plan_from_config(&config)?;
    let grid = parse_grid(&config)?;
    let nu = config.nu.first().copied().unwrap_or(0.2);
    // grid search runs many backtests; coverage bands use a reduced
    // replicate count unless one was set explicitly
    let grid_replicates = if config.replicates == RunConfig::default().replicates {
        wcoda_core::evaluation::GRID_SEARCH_REPLICATES
    } else {
        config.replicates
    };
    let method = MethodConfig {
        k_rule: k_rule(&config),
        basis: config.score_basis,
        fit_start: config.fit_start,
        intervals: Some(IntervalSettings {
            nus: vec![nu],
            replicates: grid_replicates,
            seed: config.seed,
        }),
        ..MethodConfig::default()
    };
    let criterion = config.criterion.to_selection(nu);
    let selected =
        wcoda_core::evaluation::select_kappa(&series, &plan, criterion, &grid, &method)?;

    let mut out = open_writer(&dir, "selected_kappa.csv")?;
    writeln!(out, "horizon,kappa").map_err(CliError::io)?;
    for (h0, kappa) in selected.iter().enumerate() {
        writeln!(out, "{},{kappa:.3}", h0 + 1).map_err(CliError::io)?;
    }
    out.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "select-kappa",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            closure: true,
            ..ManifestNotes::default()
        },
    )?;
    println!("selected parameters {selected:?} -> {}", dir.display());
    Ok(())
}

fn read_kappa_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io)?;
    let mut kappas = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(CliError::parse(format!(
                "{}: line {} must be horizon,kappa",
                path.display(),
                lineno + 1
            )));
        }
        kappas.push(fields[1].trim().parse().map_err(|_| {
            CliError::parse(format!("{}: bad value on line {}", path.display(), lineno + 1))
        })?);
    }
    if kappas.is_empty() {
        return Err(CliError::parse(format!("{}: no rows", path.display())));
    }
    Ok(kappas)
}

pub fn forecast(config: RunConfig, kappa_file: Option<PathBuf>) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let fit = fit_from_config(&config, &series)?;
    let h_max = config.horizons;

    let mut clamped = 0usize;
    let mut out = open_writer(&dir, "forecast.csv")?;
    writeln!(out, "horizon,age,count").map_err(CliError::io)?;
    if config.no_closure {
        // raw inverse transform, for comparison against pipelines that
        // skip the closing step
        let (log_curves, n_clamped) = forecast_log_curves(&fit.model, h_max, series.n_ages())?;
        clamped = n_clamped;
        for h in 1..=h_max {
            let beta_hat = log_curves.row(h - 1).transpose();
            let curve = clr_inverse_raw(&beta_hat, fit.decomp.alpha())?;
            for (i, &age) in series.ages().iter().enumerate() {
                writeln!(out, "{h},{age},{:.6}", curve[i]).map_err(CliError::io)?;
            }
        }
    } else if let Some(path) = kappa_file {
        // one decay parameter per horizon: refit per distinct value
        let kappas = read_kappa_file(&path)?;
        for h in 1..=h_max {
            let kappa = *kappas.get(h - 1).ok_or_else(|| {
                CliError::domain(format!("no decay parameter for horizon {h}"))
            })?;
            let fit_h = fit_pipeline(&series, kappa, k_rule(&config), config.score_basis)?;
            let fc = fit_h.forecast(h)?;
            clamped += fc.clamped();
            let curve = fc.curve(h);
            for (i, &age) in series.ages().iter().enumerate() {
                writeln!(out, "{h},{age},{:.6}", curve[i]).map_err(CliError::io)?;
            }
        }
    } else {
        let fc = fit.forecast(h_max)?;
        clamped = fc.clamped();
        for h in 1..=h_max {
            let curve = fc.curve(h);
            for (i, &age) in series.ages().iter().enumerate() {
                writeln!(out, "{h},{age},{:.6}", curve[i]).map_err(CliError::io)?;
            }
        }
    }
    out.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "forecast",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            clamped_values: clamped,
            closure: !config.no_closure,
        },
    )?;
    println!("{h_max} forecast horizons -> {}", dir.display());
    Ok(())
}

pub fn intervals(config: RunConfig) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let fit = fit_from_config(&config, &series)?;
    let ensemble = fit.bootstrap(config.horizons, config.replicates, config.seed)?;

    let nus = if config.nu.is_empty() {
        vec![0.2]
    } else {
        config.nu.clone()
    };
    for &nu in &nus {
        let band = prediction_band(&ensemble, nu)?;
        let mut out = open_writer(&dir, &format!("intervals_{nu}.csv"))?;
        writeln!(out, "horizon,age,lower,upper").map_err(CliError::io)?;
        for h in 1..=config.horizons {
            for (i, &age) in series.ages().iter().enumerate() {
                writeln!(
                    out,
                    "{h},{age},{:.6},{:.6}",
                    band.lower()[(h - 1, i)],
                    band.upper()[(h - 1, i)]
                )
                .map_err(CliError::io)?;
            }
        }
        out.flush().map_err(CliError::io)?;
    }

    finish(
        &dir,
        &config,
        "intervals",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            closure: true,
            ..ManifestNotes::default()
        },
    )?;
    println!(
        "{} replicates x {} horizons -> {}",
        config.replicates,
        config.horizons,
        dir.display()
    );
    Ok(())
}

pub fn backtest(config: RunConfig, kappa_file: Option<PathBuf>) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let plan = plan_from_config(&config)?;
    let kappa = match kappa_file {
        Some(path) => KappaSpec::PerHorizon(read_kappa_file(&path)?),
        None => KappaSpec::Fixed(config.kappa),
    };
    let intervals = if config.nu.is_empty() {
        None
    } else {
        Some(IntervalSettings {
            nus: config.nu.clone(),
            replicates: config.replicates,
            seed: config.seed,
        })
    };
    let method = MethodConfig {
        kappa,
        k_rule: k_rule(&config),
        basis: config.score_basis,
        fit_start: config.fit_start,
        intervals,
        phase: BacktestPhase::Test,
    };
    let report = expanding_window_backtest(&series, &plan, &method)?;

    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::other(format!("report: {e}")))?;
    fs::write(dir.join("error_report.json"), json + "\n").map_err(CliError::io)?;
    fs::write(dir.join("report.txt"), format_report(&report, false)).map_err(CliError::io)?;

    let mut point = open_writer(&dir, "error_report.csv")?;
    writeln!(point, "horizon,n_forecasts,kld,jsd_simple,jsd_geometric")
        .map_err(CliError::io)?;
    for entry in &report.horizons {
        writeln!(
            point,
            "{},{},{:.12e},{:.12e},{:.12e}",
            entry.horizon, entry.n_forecasts, entry.kld, entry.jsd_simple, entry.jsd_geometric
        )
        .map_err(CliError::io)?;
    }
    point.flush().map_err(CliError::io)?;

    if !report.intervals.is_empty() {
        let mut coverage = open_writer(&dir, "coverage.csv")?;
        writeln!(coverage, "nu,horizon,ecp,cpd").map_err(CliError::io)?;
        for entry in &report.intervals {
            writeln!(
                coverage,
                "{},{},{:.6},{:.6}",
                entry.nu, entry.horizon, entry.ecp, entry.cpd
            )
            .map_err(CliError::io)?;
        }
        coverage.flush().map_err(CliError::io)?;
    }

    let mut origins = open_writer(&dir, "origins.csv")?;
    writeln!(
        origins,
        "origin_year,horizon,target_year,kld,jsd_simple,jsd_geometric"
    )
    .map_err(CliError::io)?;
    for record in &report.origins {
        writeln!(
            origins,
            "{},{},{},{:.12e},{:.12e},{:.12e}",
            record.origin_year,
            record.horizon,
            record.target_year,
            record.kld,
            record.jsd_simple,
            record.jsd_geometric
        )
        .map_err(CliError::io)?;
    }
    origins.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "backtest",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            closure: true,
            ..ManifestNotes::default()
        },
    )?;
    println!(
        "backtest over {} horizons (mean KLD x100 = {:.3}) -> {}",
        report.horizons.len(),
        report.mean_kld * 100.0,
        dir.display()
    );
    Ok(())
}

fn parse_int_range(spec: &str) -> Result<Vec<u32>, CliError> {
    let (lo, hi, step) = RunConfig::parse_range(spec)?;
    if lo < 0.0 || hi < lo || step <= 0.0 {
        return Err(CliError::parse(format!("bad range '{spec}'")));
    }
    let mut values = Vec::new();
    let mut current = lo;
    while current <= hi + 1e-9 {
        values.push(current.round() as u32);
        current += step;
    }
    Ok(values)
}

pub fn annuity(config: RunConfig) -> Result<(), CliError> {
    let (series, input) = load_series(&config)?;
    let dir = out_dir(&config)?;
    let ages = parse_int_range(&config.ages)?;
    let maturities = parse_int_range(&config.maturities)?;
    let h_max = maturities.iter().max().copied().unwrap_or(0) as usize;
    if h_max == 0 {
        return Err(CliError::parse("empty maturity range"));
    }
    let terminal = series.ages().last().copied().unwrap_or(0);

    let fit = fit_from_config(&config, &series)?;
    let fc = fit.forecast(h_max)?;
    let want_intervals = !config.nu.is_empty();
    let ensemble = if want_intervals {
        Some(fit.bootstrap(h_max, config.replicates, config.seed)?)
    } else {
        None
    };
    let nu = config.nu.first().copied().unwrap_or(0.05);

    let mut quotes: Vec<AnnuityQuote> = Vec::new();
    for &age in &ages {
        for &maturity in &maturities {
            if age + maturity > terminal {
                continue;
            }
            let mut quote = price_annuity(&fc, age, maturity, config.rate)?;
            if let Some(ensemble) = &ensemble {
                let interval =
                    price_annuity_interval(ensemble, age, maturity, config.rate, nu)?;
                quote.interval = interval.interval;
            }
            quotes.push(quote);
        }
    }

    let mut csv = open_writer(&dir, "annuity.csv")?;
    if want_intervals {
        writeln!(csv, "age,maturity,rate,price,lower,upper").map_err(CliError::io)?;
    } else {
        writeln!(csv, "age,maturity,rate,price").map_err(CliError::io)?;
    }
    for quote in &quotes {
        match quote.interval {
            Some((lower, upper)) => writeln!(
                csv,
                "{},{},{},{:.3},{:.3},{:.3}",
                quote.age, quote.maturity, quote.rate, quote.price, lower, upper
            )
            .map_err(CliError::io)?,
            None => writeln!(
                csv,
                "{},{},{},{:.3}",
                quote.age, quote.maturity, quote.rate, quote.price
            )
            .map_err(CliError::io)?,
        }
    }
    csv.flush().map_err(CliError::io)?;

    let mut text = open_writer(&dir, "annuity.txt")?;
    writeln!(
        text,
        "annuity prices per unit annual benefit (rate {:.1}%)",
        config.rate * 100.0
    )
    .map_err(CliError::io)?;
    write!(text, "{:>5}", "age").map_err(CliError::io)?;
    for &maturity in &maturities {
        write!(text, "{:>9}", format!("T={maturity}")).map_err(CliError::io)?;
    }
    writeln!(text).map_err(CliError::io)?;
    for &age in &ages {
        write!(text, "{age:>5}").map_err(CliError::io)?;
        for &maturity in &maturities {
            let cell = quotes
                .iter()
                .find(|q| q.age == age && q.maturity == maturity)
                .map(|q| format!("{:.3}", q.price))
                .unwrap_or_default();
            write!(text, "{cell:>9}").map_err(CliError::io)?;
        }
        writeln!(text).map_err(CliError::io)?;
    }
    if want_intervals {
        writeln!(text, "\npointwise {:.0}% intervals", (1.0 - nu) * 100.0)
            .map_err(CliError::io)?;
        for &age in &ages {
            write!(text, "{age:>5}").map_err(CliError::io)?;
            for &maturity in &maturities {
                let cell = quotes
                    .iter()
                    .find(|q| q.age == age && q.maturity == maturity)
                    .and_then(|q| q.interval)
                    .map(|(lo, hi)| format!("({lo:.3}, {hi:.3})"))
                    .unwrap_or_default();
                write!(text, "{cell:>19}").map_err(CliError::io)?;
            }
            writeln!(text).map_err(CliError::io)?;
        }
    }
    text.flush().map_err(CliError::io)?;

    finish(
        &dir,
        &config,
        "annuity",
        Some(&input),
        ManifestNotes {
            repaired_cells: series.repaired_cells(),
            clamped_values: fc.clamped(),
            closure: true,
        },
    )?;
    println!("{} quotes -> {}", quotes.len(), dir.display());
    Ok(())
}

/// Formats an error report as the tables the reports print: point
/// divergences scaled by 100, then coverage per significance level.
fn format_report(report: &ErrorReport, sqrt: bool) -> String {
    use std::fmt::Write as _;
    let transform = |value: f64| if sqrt { value.sqrt() } else { value };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "point forecast errors (x100){}",
        if sqrt { ", square-root scale for JSD" } else { "" }
    );
    let _ = writeln!(out, "{:>8}{:>9}{:>9}{:>9}", "horizon", "KLD", "JSD(s)", "JSD(g)");
    for entry in &report.horizons {
        let _ = writeln!(
            out,
            "{:>8}{:>9.3}{:>9.3}{:>9.3}",
            entry.horizon,
            entry.kld * 100.0,
            transform(entry.jsd_simple) * 100.0,
            transform(entry.jsd_geometric) * 100.0
        );
    }
    let _ = writeln!(
        out,
        "{:>8}{:>9.3}{:>9.3}{:>9.3}",
        "mean",
        report.mean_kld * 100.0,
        transform(report.mean_jsd_simple) * 100.0,
        transform(report.mean_jsd_geometric) * 100.0
    );

    let mut nus: Vec<f64> = report.intervals.iter().map(|e| e.nu).collect();
    nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nus.dedup();
    for nu in nus {
        let _ = writeln!(out, "\ninterval coverage at nu = {nu}");
        let _ = writeln!(out, "{:>8}{:>9}{:>9}", "horizon", "ECP", "CPD");
        let mut cpd_sum = 0.0;
        let mut count = 0usize;
        for entry in report.intervals.iter().filter(|e| e.nu == nu) {
            let _ = writeln!(out, "{:>8}{:>9.3}{:>9.3}", entry.horizon, entry.ecp, entry.cpd);
            cpd_sum += entry.cpd;
            count += 1;
        }
        if count > 0 {
            let _ = writeln!(out, "{:>8}{:>9}{:>9.3}", "mean", "", cpd_sum / count as f64);
        }
    }
    out
}

pub fn report(run_dir: &Path, sqrt: bool, plot_data: bool) -> Result<(), CliError> {
    let path = run_dir.join("error_report.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let report: ErrorReport = serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;

    print!("{}", format_report(&report, sqrt));

    if plot_data {
        let mut out = open_writer(run_dir, "plot_data.csv")?;
        writeln!(out, "metric,nu,horizon,value").map_err(CliError::io)?;
        for entry in &report.horizons {
            writeln!(out, "kld,,{},{:.12e}", entry.horizon, entry.kld).map_err(CliError::io)?;
            writeln!(out, "jsd_simple,,{},{:.12e}", entry.horizon, entry.jsd_simple)
                .map_err(CliError::io)?;
            writeln!(
                out,
                "jsd_geometric,,{},{:.12e}",
                entry.horizon, entry.jsd_geometric
            )
            .map_err(CliError::io)?;
        }
        for entry in &report.intervals {
            writeln!(out, "ecp,{},{},{:.6}", entry.nu, entry.horizon, entry.ecp)
                .map_err(CliError::io)?;
            writeln!(out, "cpd,{},{},{:.6}", entry.nu, entry.horizon, entry.cpd)
                .map_err(CliError::io)?;
        }
        out.flush().map_err(CliError::io)?;
    }
    Ok(())
}

pub fn synth(opts: &SynthOpts) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        years: opts.years,
        start_year: opts.start_year,
        seed: opts.seed,
        ..SyntheticSpec::default()
    };
    let series = match opts.kind.as_str() {
        "stationary" => stationary_surface(&spec),
        "regime-change" => regime_change_surface(&spec, opts.recent),
        "gaussian" => gaussian_rank1_surface(&spec),
        other => {
            return Err(CliError::parse(format!(
                "unknown kind '{other}' (expected stationary, regime-change, or gaussian)"
            )))
        }
    };
    if let Some(parent) = opts.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(CliError::io)?;
        }
    }
    let file = fs::File::create(&opts.out).map_err(CliError::io)?;
    let mut writer = BufWriter::new(file);
    series.write_csv(&mut writer)?;
    writer.flush().map_err(CliError::io)?;
    println!(
        "{} surface: {} years x {} ages -> {}",
        opts.kind,
        series.n_years(),
        series.n_ages(),
        opts.out.display()
    );
    Ok(())
}
