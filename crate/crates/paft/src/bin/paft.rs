//! Command-line front end: ingest patient tables, run the estimators, and
//! emit curves, weight ledgers, simulated cohorts, and identity reports.
//!
//! Every run writes a `manifest.json` capturing the full configuration, so a
//! run can be reproduced byte for byte from its outputs. Exit codes: 0
//! success, 1 validation error, 2 numerical failure, 3 identity-check
//! failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num::BigRational;

use paft::bootstrap::{bootstrap_ci, estimate_ccif, BootstrapConfig, CcifMethod};
use paft::cohort::{derive_cohort, PatientRecord, TerminalKind, TimeGrid};
use paft::equivalence::{run_identity_suite, IdentityCheck, IdentityReport};
use paft::error::{Error, Result};
use paft::estimators::{factual_cif, paf_curve, EstimateCurve};
use paft::io::{
    create_file, read_covariates_file, read_patients_file, write_covariates_csv, write_curves_csv,
    write_patients_csv, write_truth_csv, PatientTable,
};
use paft::ipcw::ipcw_model_estimate;
use paft::ledger::{Scheme, WeightLedger};
use paft::lifetable::LifeTable;
use paft::manifest::RunManifest;
use paft::simulate::{monte_carlo_truth, simulate_cohort, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "paft",
    version,
    about = "Attributable-fraction estimation for a time-dependent exposure \
             under discrete-time competing risks"
)]
struct Cli {
    /// Evaluation horizon J (curves cover days 0..=J).
    #[arg(long, global = true)]
    horizon: Option<u32>,

    /// Patient table (patients.csv).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Per-day covariate table (covariates.csv), long format.
    #[arg(long, global = true)]
    covariates: Option<PathBuf>,

    /// Directory receiving all output files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    /// Master seed (bootstrap resampling; overrides the scenario seed for
    /// `simulate`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the factual and counterfactual incidence of death and the
    /// attributable fraction; writes curves.csv.
    Estimate {
        /// Counterfactual method: censoring, exclusion, competing, or ipcw.
        #[arg(long, value_parser = parse_method)]
        method: CcifMethod,

        /// Attach percentile bootstrap intervals, optionally setting the
        /// number of replicates.
        #[arg(long, num_args = 0..=1, default_missing_value = "500")]
        bootstrap: Option<u64>,

        /// Two-sided coverage level of the bootstrap intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },

    /// Export one scheme's weight and annotation ledgers (exact arithmetic);
    /// writes weights.csv and annotations.csv.
    Ledger {
        /// Reweighting scheme: censoring, exclusion, or competing.
        #[arg(long, value_parser = parse_scheme)]
        method: Scheme,
    },

    /// Simulate a confounded cohort and its Monte-Carlo counterfactual ground
    /// truth; writes patients.csv, covariates.csv, truth.csv, scenario.toml.
    Simulate {
        /// Scenario TOML file (defaults to the built-in preset).
        #[arg(long, conflicts_with = "preset")]
        scenario: Option<PathBuf>,

        /// Built-in scenario: confounded or no-confounding.
        #[arg(long, default_value = "confounded")]
        preset: String,

        /// Full-cohort re-simulations aggregated into the ground-truth curve.
        #[arg(long, default_value_t = 100)]
        truth_replicates: u64,
    },

    /// Run the algebraic identity suite on a patient table (optionally
    /// validating an exported ledger); writes identities.json.
    Check {
        /// Previously exported weights.csv to compare against exact
        /// recomputation.
        #[arg(long)]
        ledger: Option<PathBuf>,

        /// Scheme of the ledger file (required with --ledger).
        #[arg(long, value_parser = parse_scheme)]
        method: Option<Scheme>,
    },
}

fn parse_method(text: &str) -> std::result::Result<CcifMethod, String> {
    match text {
        "censoring" => Ok(CcifMethod::Censoring),
        "exclusion" => Ok(CcifMethod::Exclusion),
        "competing" => Ok(CcifMethod::Competing),
        "ipcw" => Ok(CcifMethod::Ipcw),
        other => Err(format!(
            "unknown method `{other}` (expected censoring, exclusion, competing, or ipcw)"
        )),
    }
}

fn parse_scheme(text: &str) -> std::result::Result<Scheme, String> {
    match text {
        "censoring" => Ok(Scheme::Censoring),
        "exclusion" => Ok(Scheme::Exclusion),
        "competing" => Ok(Scheme::Competing),
        other => Err(format!(
            "unknown scheme `{other}` (expected censoring, exclusion, or competing)"
        )),
    }
}

fn main() {
    // Route argument errors through the validation exit code (1); clap's
    // default (2) is reserved for numerical failures here. `--help` and
    // `--version` print to stdout and stay success.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            e.print().expect("clap diagnostics print");
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.output_dir).map_err(|e| {
        Error::InvalidInput(format!("cannot create {}: {e}", cli.output_dir.display()))
    })?;
    match cli.command {
        Command::Estimate {
            method,
            bootstrap,
            level,
        } => cmd_estimate(&cli, method, bootstrap, level),
        Command::Ledger { method } => cmd_ledger(&cli, method),
        Command::Simulate {
            ref scenario,
            ref preset,
            truth_replicates,
        } => cmd_simulate(&cli, scenario.as_deref(), preset, truth_replicates),
        Command::Check { ref ledger, method } => cmd_check(&cli, ledger.as_deref(), method),
    }
}

fn grid_from(cli: &Cli) -> Result<TimeGrid> {
    let horizon = cli
        .horizon
        .ok_or_else(|| Error::InvalidInput("--horizon is required for this subcommand".into()))?;
    TimeGrid::new(horizon)
}

fn patients_from(cli: &Cli) -> Result<(PathBuf, PatientTable)> {
    let path = cli
        .input
        .clone()
        .ok_or_else(|| Error::InvalidInput("--input is required for this subcommand".into()))?;
    let table = read_patients_file(&path)?;
    Ok((path, table))
}

/// Per-method input requirements: everything except the exclusion method
/// needs infection onset timing; exclusion only needs end-of-stay status.
fn require_onset_timing(has_infection_day: bool, method: &str) -> Result<()> {
    if has_infection_day {
        Ok(())
    } else {
        Err(Error::MethodDataMismatch {
            method: method.into(),
            missing: "infection onset timing (patients.csv has no infection_day column)".into(),
        })
    }
}

fn write_manifest(cli: &Cli, manifest: RunManifest) -> Result<()> {
    let manifest = manifest.finalize();
    let path = cli.output_dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json())
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn cmd_estimate(cli: &Cli, method: CcifMethod, bootstrap: Option<u64>, level: f64) -> Result<()> {
    let grid = grid_from(cli)?;
    let (input_path, table) = patients_from(cli)?;
    if table.records.is_empty() {
        return Err(Error::InvalidInput(
            "patients.csv contains no data rows".into(),
        ));
    }
    match method {
        CcifMethod::Censoring | CcifMethod::Competing | CcifMethod::Ipcw => {
            require_onset_timing(table.has_infection_day, method.as_str())?;
        }
        CcifMethod::Exclusion => {
            if !table.has_infection_day {
                eprintln!(
                    "note: patients.csv has no infection_day column; every patient is \
                     treated as never exposed"
                );
            }
        }
    }

    let cohort = derive_cohort(&table.records, &grid)?;
    let covariates = match &cli.covariates {
        Some(path) => Some(read_covariates_file(path, &table.records)?),
        None => None,
    };

    let ccif = match bootstrap {
        Some(replicates) => {
            let config = BootstrapConfig {
                replicates,
                level,
                seed: cli.seed.unwrap_or(0),
            };
            bootstrap_ci(method, &cohort, covariates.as_ref(), &grid, &config)?
        }
        None => estimate_ccif(method, &cohort, covariates.as_ref(), &grid)?,
    };

    let factual = match LifeTable::factual(&table.records, &grid) {
        Ok(t) => Some(factual_cif(&t, TerminalKind::Death)?),
        Err(Error::FactualCifNeedsTerminalEvents {
            patient_id,
            onset_day,
        }) => {
            eprintln!(
                "warning: cif_factual column omitted: follow-up after infection onset \
                 (day {onset_day}) is unrecorded for patient {patient_id}"
            );
            None
        }
        Err(e) => return Err(e),
    };
    let paf: Option<EstimateCurve> = factual.as_ref().map(|f| paf_curve(f, &ccif)).transpose()?;

    let curves_path = cli.output_dir.join("curves.csv");
    write_curves_csv(
        create_file(&curves_path)?,
        factual.as_ref(),
        &ccif,
        paf.as_ref(),
    )?;

    let mut manifest = RunManifest::new("estimate", grid.horizon())
        .method(method.as_str())
        .input("patients", input_path.display())
        .output("curves", curves_path.display());
    if let Some(path) = &cli.covariates {
        manifest = manifest.input("covariates", path.display());
    }
    if let Some(replicates) = bootstrap {
        manifest = manifest
            .seed(cli.seed.unwrap_or(0))
            .parameter("bootstrap_replicates", replicates)
            .parameter("level", level);
    }
    if method == CcifMethod::Ipcw {
        let history = covariates.as_ref().expect("validated by the estimator");
        let (fit, _) = ipcw_model_estimate(&cohort, history, &grid)?;
        let model_path = cli.output_dir.join("model.json");
        write_json(&model_path, &fit)?;
        manifest = manifest.output("model", model_path.display());
    }
    write_manifest(cli, manifest)
}

fn ledger_header(horizon: u32) -> Vec<String> {
    let mut header = vec!["patient_id".to_string()];
    header.extend((0..=horizon).map(|j| format!("day_{j}")));
    header
}

fn cmd_ledger(cli: &Cli, scheme: Scheme) -> Result<()> {
    let grid = grid_from(cli)?;
    let (input_path, table) = patients_from(cli)?;
    if scheme != Scheme::Exclusion {
        require_onset_timing(table.has_infection_day, scheme.as_str())?;
    }

    let weights_path = cli.output_dir.join("weights.csv");
    let annotations_path = cli.output_dir.join("annotations.csv");
    if table.records.is_empty() {
        for path in [&weights_path, &annotations_path] {
            let mut w = csv::Writer::from_writer(create_file(path)?);
            w.write_record(ledger_header(grid.horizon()))?;
            w.flush()?;
        }
    } else {
        let cohort = derive_cohort(&table.records, &grid)?;
        let ledger = WeightLedger::<BigRational>::build(&cohort, &grid, scheme)?;
        ledger.write_weights_csv(create_file(&weights_path)?)?;
        ledger.write_annotations_csv(create_file(&annotations_path)?)?;
    }

    let manifest = RunManifest::new("ledger", grid.horizon())
        .method(scheme.as_str())
        .input("patients", input_path.display())
        .output("weights", weights_path.display())
        .output("annotations", annotations_path.display());
    write_manifest(cli, manifest)
}

fn cmd_simulate(
    cli: &Cli,
    scenario: Option<&Path>,
    preset: &str,
    truth_replicates: u64,
) -> Result<()> {
    if cli.horizon.is_some() {
        return Err(Error::InvalidInput(
            "simulate takes its horizon from the scenario; drop --horizon".into(),
        ));
    }
    let mut config = match scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
            ScenarioConfig::from_toml(&text)?
        }
        None => match preset {
            "confounded" => ScenarioConfig::confounded(),
            "no-confounding" => ScenarioConfig::no_confounding(),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown preset `{other}` (expected confounded or no-confounding)"
                )))
            }
        },
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let cohort = simulate_cohort(&config)?;
    let truth = monte_carlo_truth(&config, truth_replicates)?;

    let patients_path = cli.output_dir.join("patients.csv");
    let covariates_path = cli.output_dir.join("covariates.csv");
    let truth_path = cli.output_dir.join("truth.csv");
    let scenario_path = cli.output_dir.join("scenario.toml");
    write_patients_csv(&cohort.records, create_file(&patients_path)?)?;
    let ids: Vec<String> = cohort
        .records
        .iter()
        .map(|r| r.patient_id.clone())
        .collect();
    write_covariates_csv(&cohort.covariates, &ids, create_file(&covariates_path)?)?;
    write_truth_csv(&truth, create_file(&truth_path)?)?;
    std::fs::write(&scenario_path, config.to_toml()).map_err(|e| {
        Error::InvalidInput(format!("cannot write {}: {e}", scenario_path.display()))
    })?;

    let mut manifest = RunManifest::new("simulate", config.horizon)
        .seed(config.seed)
        .parameter("n", config.n)
        .parameter("truth_replicates", truth_replicates)
        .output("patients", patients_path.display())
        .output("covariates", covariates_path.display())
        .output("truth", truth_path.display())
        .output("scenario", scenario_path.display());
    match scenario {
        Some(path) => manifest = manifest.input("scenario", path.display()),
        None => manifest = manifest.parameter("preset", preset),
    }
    write_manifest(cli, manifest)
}

/// Compare an exported weights.csv cell-for-cell against exact recomputation.
fn ledger_file_check(
    records: &[PatientRecord],
    grid: &TimeGrid,
    scheme: Scheme,
    path: &Path,
) -> Result<IdentityCheck> {
    const IDENTITY: &str = "ledger-matches-recomputation";
    let cohort = derive_cohort(records, grid)?;
    let ledger = WeightLedger::<BigRational>::build(&cohort, grid, scheme)?;
    let mut expected = Vec::new();
    ledger.write_weights_csv(&mut expected)?;

    let parse = |bytes: &[u8]| -> Result<Vec<Vec<String>>> {
        let mut rows = Vec::new();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(bytes);
        for row in reader.records() {
            rows.push(row?.iter().map(str::to_string).collect());
        }
        Ok(rows)
    };
    let want = parse(&expected)?;
    let file = std::fs::read(path)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    let got = parse(&file)?;

    let same_shape = got.len() == want.len()
        && got
            .iter()
            .zip(&want)
            .all(|(g, w)| g.len() == w.len() && g[0] == w[0]);
    if !same_shape {
        return Ok(IdentityCheck::from_violations(
            IDENTITY,
            "exported ledger has a different shape or row labels than the recomputation",
            0.0,
            [(0u32, 1.0f64)],
        ));
    }
    // Count mismatching cells per day (column c holds day c-1).
    let days = want[0].len() - 1;
    let violations = (0..days as u32).map(|day| {
        let col = day as usize + 1;
        let mismatches = got
            .iter()
            .zip(&want)
            .filter(|(g, w)| g[col] != w[col])
            .count();
        (day, mismatches as f64)
    });
    Ok(IdentityCheck::from_violations(
        IDENTITY,
        "exported weight ledger matches exact recomputation cell for cell",
        0.0,
        violations,
    ))
}

fn cmd_check(cli: &Cli, ledger: Option<&Path>, method: Option<Scheme>) -> Result<()> {
    let grid = grid_from(cli)?;
    let (input_path, table) = patients_from(cli)?;
    let mut report: IdentityReport = run_identity_suite(&table.records, &grid)?;

    if let Some(path) = ledger {
        let scheme = method.ok_or_else(|| {
            Error::InvalidInput("--method is required with --ledger to name its scheme".into())
        })?;
        let check = ledger_file_check(&table.records, &grid, scheme, path)?;
        report.checks.push(check);
        report.pass = report.checks.iter().all(|c| c.pass);
    }

    let report_path = cli.output_dir.join("identities.json");
    write_json(&report_path, &report)?;

    let mut manifest = RunManifest::new("check", grid.horizon())
        .input("patients", input_path.display())
        .output("identities", report_path.display());
    if let Some(path) = ledger {
        manifest = manifest
            .method(method.expect("validated above").as_str())
            .input("ledger", path.display());
    }
    write_manifest(cli, manifest)?;

    for check in &report.checks {
        let status = if check.pass { "pass" } else { "FAIL" };
        println!("{status}  {}", check.identity);
    }
    for name in &report.skipped {
        println!("skip  {name} (post-onset follow-up unrecorded)");
    }
    if report.pass {
        Ok(())
    } else {
        Err(Error::IdentityCheckFailed {
            failed: report.failed(),
            total: report.checks.len(),
        })
    }
}
