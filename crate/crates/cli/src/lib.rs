//! Command-line front end: `fit`, `coverage`, `simulate`, `enumerate` and
//! `report`.
//!
//! Exit codes: 0 on success, 1 for invalid input (bad flags, unreadable or
//! malformed input files), 2 for internal failures such as an unwritable
//! output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use mmwave_diversity::channel::{Condition, Frequency};
use mmwave_diversity::coverage::{
    outage_table, receiver_threshold, LinkBudget, DEFAULT_DISTANCES_M,
};
use mmwave_diversity::diversity::reception::{
    combination_count, max_serving_count, reception_table, topology_from_links,
};
use mmwave_diversity::diversity::simulate::{
    empirical_cdf, path_loss_series, pool_reception, simulate_drop,
};
use mmwave_diversity::diversity::{ModelSet, Topology};
use mmwave_diversity::fitting::{fit_ci, PathLossSample};
use mmwave_diversity::io::{
    emit_results, format_percent, load_masks, load_samples, parse_scenario, parse_topology,
    read_metadata, CdfRow, ModelCard, ResultBundle, RunMetadata,
};
use mmwave_diversity::{Error, Execution};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "MMWD_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mmwd",
    version,
    about = "mmWave coverage and base-station diversity analysis"
)]
pub struct Cli {
    /// Output directory for result files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    pub out: PathBuf,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit CI path loss models to a sample CSV, one model per condition.
    Fit(FitArgs),
    /// Edge and region outage table for the NLOS and NLOS-best models.
    Coverage(CoverageArgs),
    /// Monte Carlo drops: reception vs. serving count, Best-N and NN CDFs.
    Simulate(SimulateArgs),
    /// Serving-set combination counts, optionally with measured masks.
    Enumerate(EnumerateArgs),
    /// Human-readable summary of a result directory.
    Report,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Carrier frequency of the samples in GHz.
    #[arg(long, default_value_t = 73.5)]
    pub frequency_ghz: f64,
    /// Abort on the first malformed row instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Scenario providing models and link budget; defaults apply otherwise.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Comma-separated distances in meters.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DISTANCES_M.to_vec())]
    pub distances: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Largest serving-set size; defaults to the largest in the scenario.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Number of Best-N / nearest-neighbor ranks in the CDF output.
    #[arg(long, default_value_t = 3)]
    pub ranks: usize,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    /// JSON object mapping UE id to serving base station ids.
    #[arg(long, conflicts_with = "scenario")]
    pub topology: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Measured masks (`rx_id,tx_id,mask`); adds all-angle reception rates.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(bundle: &ResultBundle, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    emit_results(bundle, out)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", out.display())))
}

fn metadata(subcommand: &str, seed: Option<u64>, trials: Option<usize>) -> RunMetadata {
    RunMetadata {
        tool: "mmwd".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        seed,
        trials,
        timestamp: std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok()),
    }
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `stdout` and diagnostics to `stderr`.
pub fn run_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INPUT,
            };
        }
    };
    run(&cli, stdout, stderr)
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, &cli.out, stdout),
        Command::Coverage(a) => cmd_coverage(a, &cli.out, exec, stdout),
        Command::Simulate(a) => cmd_simulate(a, &cli.out, exec, stdout),
        Command::Enumerate(a) => cmd_enumerate(a, &cli.out, stdout),
        Command::Report => cmd_report(&cli.out, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Input(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_INPUT
        }
        Err(CliError::Internal(m)) => {
            let _ = writeln!(stderr, "internal error: {m}");
            EXIT_INTERNAL
        }
    }
}

fn out_line(stdout: &mut dyn Write, s: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(stdout, "{}", s.as_ref()).map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_fit(a: &FitArgs, out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = fs::File::open(&a.samples)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.samples.display())))?;
    let loaded = load_samples(file, a.strict)?;
    for (line, why) in &loaded.skipped {
        info!("skipped line {line}: {why}");
    }
    let f = Frequency::from_ghz(a.frequency_ghz)?;
    let mut groups: BTreeMap<Condition, Vec<PathLossSample>> = BTreeMap::new();
    for s in loaded.samples {
        groups.entry(s.condition).or_default().push(s);
    }
    if groups.is_empty() {
        return Err(CliError::Input("no usable samples".into()));
    }
    let mut bundle = ResultBundle {
        metadata: metadata("fit", None, None),
        ..Default::default()
    };
    for (condition, samples) in &groups {
        let model = fit_ci(samples, f)?;
        out_line(
            stdout,
            format!(
                "{condition}: PLE = {:.3}, sigma = {:.3} dB ({} samples)",
                model.ple(),
                model.sigma_db(),
                samples.len()
            ),
        )?;
        bundle
            .models
            .push(ModelCard::from_model(&model, Some(samples.len())));
    }
    emit(&bundle, out)?;
    Ok(())
}

fn cmd_coverage(
    a: &CoverageArgs,
    out: &Path,
    exec: Execution,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let (models, budget) = match &a.scenario {
        Some(p) => {
            let s = parse_scenario(&read_input(p)?)?;
            (s.models, s.budget)
        }
        None => (ModelSet::default(), LinkBudget::default()),
    };
    let mut table = BTreeMap::new();
    table.insert(Condition::Nlos, models.directional_nlos);
    table.insert(Condition::NlosBest, models.directional_nlos_best);
    let rows = outage_table(&table, &budget, &a.distances, exec)?;

    out_line(
        stdout,
        format!("receiver threshold: {:.1} dBm", receiver_threshold(&budget)),
    )?;
    out_line(
        stdout,
        format!(
            "{:<10} {:>10} {:>12} {:>12}",
            "condition", "R [m]", "edge [%]", "region [%]"
        ),
    )?;
    for r in &rows {
        out_line(
            stdout,
            format!(
                "{:<10} {:>10} {:>12} {:>12}",
                r.condition.to_string(),
                r.distance_m,
                format_percent(r.p_out_edge),
                format_percent(r.p_out_region)
            ),
        )?;
    }
    let bundle = ResultBundle {
        outage: rows,
        models: vec![
            ModelCard::from_model(&models.directional_nlos, None),
            ModelCard::from_model(&models.directional_nlos_best, None),
        ],
        metadata: metadata("coverage", None, None),
        ..Default::default()
    };
    emit(&bundle, out)?;
    Ok(())
}

fn cmd_simulate(
    a: &SimulateArgs,
    out: &Path,
    exec: Execution,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let mut scenario = parse_scenario(&read_input(&a.scenario)?)?;
    scenario.seed = a.seed.unwrap_or(scenario.seed);
    let topology = scenario.topology();
    let max_k = max_serving_count(&topology);
    let k_max = a.k_max.unwrap_or(max_k);
    if k_max == 0 || k_max > max_k {
        return Err(CliError::Input(format!("--k-max must lie in 1..={max_k}")));
    }
    let trials = a.trials as usize;
    let realizations = simulate_drop(&scenario, trials, exec)?;
    let reception = pool_reception(&realizations, &topology, k_max)?;

    let mut cdf = Vec::new();
    for (series, values) in path_loss_series(&scenario, &realizations, a.ranks) {
        for (value_db, cum_prob) in empirical_cdf(&values) {
            cdf.push(CdfRow {
                series: series.clone(),
                value_db,
                cum_prob,
            });
        }
    }
    let max_rank = a.ranks.min(max_k);
    let nn_distances = if max_rank > 0 {
        scenario.nn_distance_stats(max_rank)?
    } else {
        Vec::new()
    };

    out_line(stdout, format!("{trials} trials, seed {}", scenario.seed))?;
    for r in &reception {
        let p = r
            .probability()
            .map(|p| format!("{:.1}%", p * 100.0))
            .unwrap_or_else(|| "-".into());
        out_line(
            stdout,
            format!(
                "k={}: {} ({} combinations per trial)",
                r.k,
                p,
                r.combinations / trials as u64
            ),
        )?;
    }
    let bundle = ResultBundle {
        combinations: (1..=k_max)
            .map(|k| (k, combination_count(&topology, k)))
            .collect(),
        reception,
        cdf,
        nn_distances,
        metadata: metadata("simulate", Some(scenario.seed), Some(trials)),
        ..Default::default()
    };
    emit(&bundle, out)?;
    Ok(())
}

fn cmd_enumerate(a: &EnumerateArgs, out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let masks = match &a.masks {
        Some(p) => Some(load_masks(read_input(p)?.as_bytes())?),
        None => None,
    };
    let topology: Topology = match (&a.topology, &a.scenario, &masks) {
        (Some(p), _, _) => parse_topology(&read_input(p)?)?,
        (None, Some(p), _) => parse_scenario(&read_input(p)?)?.topology(),
        (None, None, Some(m)) => topology_from_links(m.keys()),
        (None, None, None) => {
            return Err(CliError::Input(
                "one of --topology, --scenario or --masks is required".into(),
            ))
        }
    };
    let k_max = a.k_max.unwrap_or_else(|| max_serving_count(&topology));
    let counts: Vec<(usize, u64)> = (1..=k_max)
        .map(|k| (k, combination_count(&topology, k)))
        .collect();
    out_line(
        stdout,
        counts
            .iter()
            .map(|(_, c)| c.to_string())
            .collect::<Vec<_>>()
            .join(","),
    )?;

    let mut bundle = ResultBundle {
        combinations: counts,
        metadata: metadata("enumerate", None, None),
        ..Default::default()
    };
    if let Some(m) = &masks {
        bundle.reception = reception_table(m, &topology, k_max)?;
        for r in &bundle.reception {
            if let Some(p) = r.probability() {
                out_line(
                    stdout,
                    format!(
                        "k={}: {:.1}% of {} combinations",
                        r.k,
                        p * 100.0,
                        r.combinations
                    ),
                )?;
            }
        }
    }
    emit(&bundle, out)?;
    Ok(())
}

fn cmd_report(out: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let meta = out.join("metadata.json");
    if !meta.exists() {
        return Err(CliError::Input(format!(
            "{} is not a result directory",
            out.display()
        )));
    }
    let meta = read_metadata(&read_input(&meta)?)
        .map_err(|e| CliError::Input(format!("metadata.json: {e}")))?;
    out_line(
        stdout,
        format!("{} {} ({})", meta.tool, meta.version, meta.subcommand),
    )?;
    if let Some(seed) = meta.seed {
        out_line(stdout, format!("seed: {seed}"))?;
    }
    if let Some(t) = meta.trials {
        out_line(stdout, format!("trials: {t}"))?;
    }
    for name in [
        "outage.csv",
        "reception.csv",
        "combinations.csv",
        "nn_distance.csv",
    ] {
        let path = out.join(name);
        if !path.exists() {
            continue;
        }
        out_line(stdout, format!("\n== {name}"))?;
        let text = read_input(&path)?;
        let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
        let width = rows.iter().flatten().map(|c| c.len()).max().unwrap_or(0);
        for row in rows {
            let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
            out_line(stdout, line.join("  "))?;
        }
    }
    let cdf = out.join("cdf.csv");
    if cdf.exists() {
        out_line(stdout, "\n== cdf.csv medians")?;
        let text = read_input(&cdf)?;
        let mut medians: BTreeMap<String, f64> = BTreeMap::new();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                continue;
            }
            let (Ok(v), Ok(p)) = (f[1].parse::<f64>(), f[2].parse::<f64>()) else {
                continue;
            };
            if p >= 0.5 {
                medians.entry(f[0].to_string()).or_insert(v);
            }
        }
        for (series, m) in medians {
            out_line(stdout, format!("{series:>8}: {m:.1} dB"))?;
        }
    }
    Ok(())
}
