//! Command-line driver. Subcommands share a layered configuration
//! (TOML file, flag overrides); outputs are deterministic files under
//! `--out`, errors are single JSON lines on stderr, and the exit code is
//! 1 for configuration problems and 2 for runtime failures.

mod config;
mod emit;

use anderson_dephase::ensemble::{
    run_ensemble, run_realization, EnsembleAggregate, EnsembleError, EnsembleSpec,
    RealizationOutcome,
};
use anderson_dephase::lattice::{ModelError, OccupationProfile};
use anderson_dephase::peaks::{peak_records, DEFAULT_PEAK_FLOOR, DEFAULT_TRACK_WINDOW};
use clap::{Parser, Subcommand};
use config::{resolve, CommonArgs, FormatArg, Resolved};
use emit::{cell, write_csv, write_json, Meta, VERSION};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn report(&self) -> u8 {
        let (kind, message, code) = match self {
            CliError::Config(m) => ("invalid_config", m, 1),
            CliError::Runtime(m) => ("runtime", m, 2),
        };
        eprintln!(
            "{}",
            serde_json::json!({ "error": kind, "message": message })
        );
        code
    }
}

fn classify(e: EnsembleError) -> CliError {
    match &e {
        EnsembleError::InvalidSpec(_)
        | EnsembleError::MissingReference { .. }
        | EnsembleError::Model(ModelError::InvalidConfig(_)) => CliError::Config(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "anderson-dephase",
    version = VERSION,
    about = "Disordered chain under distance-dependent dephasing: evolutions, ensembles, sweeps, peak analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one disorder realization at one dephasing rate
    Evolve(CommonArgs),
    /// Run a screened disorder ensemble and write mean profiles
    Ensemble(CommonArgs),
    /// Sweep the rate grid and write sub-ensemble prominence curves
    Sweep(CommonArgs),
    /// Detect peaks and prominences in a site-profile CSV
    Peaks(PeaksArgs),
}

#[derive(Debug, clap::Args)]
struct PeaksArgs {
    /// Input CSV: (site, population) rows, or one population per line
    #[arg(long)]
    input: PathBuf,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Detection floor for peak heights
    #[arg(long)]
    floor: Option<f64>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => ExitCode::from(e.report()),
    }
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            return Err(CliError::Config(e.render().to_string().trim_end().into()));
        }
    };
    match cli.command {
        Command::Evolve(args) => {
            let resolved = resolve(&args)?;
            init_threads(resolved.threads)?;
            cmd_evolve(resolved)
        }
        Command::Ensemble(args) => {
            let resolved = resolve(&args)?;
            init_threads(resolved.threads)?;
            cmd_ensemble(resolved, true)
        }
        Command::Sweep(args) => {
            let resolved = resolve(&args)?;
            init_threads(resolved.threads)?;
            cmd_ensemble(resolved, false)
        }
        Command::Peaks(args) => cmd_peaks(args),
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

#[derive(Serialize)]
struct EvolveConfig<'a> {
    spec: &'a EnsembleSpec,
    gamma: f64,
    realization: u64,
}

fn cmd_evolve(resolved: Resolved) -> Result<(), CliError> {
    let gamma = resolved.gamma.ok_or_else(|| {
        CliError::Config("evolve needs --gamma (or gamma under [run] in the config)".into())
    })?;
    resolved.spec.validate().map_err(classify)?;
    let outcome = run_realization(&resolved.spec, resolved.realization, gamma).map_err(classify)?;

    let out = &resolved.out;
    ensure_dir(out)?;
    let meta = Meta::new(&EvolveConfig {
        spec: &resolved.spec,
        gamma,
        realization: resolved.realization,
    });

    #[derive(Serialize)]
    struct EvolveResults<'a> {
        record: &'a anderson_dephase::ensemble::RealizationRecord,
        diagnostics: &'a anderson_dephase::evolution::IntegrationDiagnostics,
        samples: usize,
    }
    let path = out.join("run.json");
    write_json(
        &path,
        &meta,
        EvolveResults {
            record: &outcome.record,
            diagnostics: &outcome.trajectory.diagnostics,
            samples: outcome.trajectory.samples.len(),
        },
    )
    .map_err(|e| io_error(&path, e))?;

    if resolved.format == FormatArg::Csv {
        write_evolve_csv(out, &meta, &outcome)?;
    }
    println!(
        "delta {}; wrote {}",
        outcome.record.delta,
        out.display()
    );
    Ok(())
}

fn write_evolve_csv(out: &Path, meta: &Meta, outcome: &RealizationOutcome) -> Result<(), CliError> {
    // trajectory of the tracked main peak
    let samples = &outcome.trajectory.samples;
    let mut site = samples[0].argmax();
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let lo = site.saturating_sub(DEFAULT_TRACK_WINDOW);
        let hi = (site + DEFAULT_TRACK_WINDOW + 1).min(s.populations.len());
        let mut best = lo;
        for x in lo + 1..hi {
            if s.populations[x] > s.populations[best] {
                best = x;
            }
        }
        site = best;
        rows.push(format!("{},{},{}", s.time, site + 1, s.populations[site]));
    }
    let path = out.join("trajectory.csv");
    write_csv(&path, meta, &[], "time,site,height", &rows).map_err(|e| io_error(&path, e))?;

    let rows: Vec<String> = outcome
        .record
        .decays
        .iter()
        .map(|d| format!("{},{}", d.fraction, cell(d.time)))
        .collect();
    let path = out.join("decays.csv");
    write_csv(&path, meta, &[], "fraction,time", &rows).map_err(|e| io_error(&path, e))?;

    for decay in &outcome.record.decays {
        let Some(profile) = &decay.profile else {
            continue;
        };
        let extra = vec![
            format!("gamma: {}", outcome.record.gamma),
            format!("fraction: {}", decay.fraction),
            format!("time: {}", cell(decay.time)),
        ];
        let rows: Vec<String> = profile
            .populations
            .iter()
            .enumerate()
            .map(|(x, &p)| format!("{},{}", x + 1, p))
            .collect();
        let path = out.join(format!("profile_{}.csv", decay.fraction));
        write_csv(&path, meta, &extra, "site,population", &rows)
            .map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

fn cmd_ensemble(resolved: Resolved, write_profiles: bool) -> Result<(), CliError> {
    resolved.spec.validate().map_err(classify)?;
    let aggregate = run_ensemble(&resolved.spec).map_err(classify)?;
    if aggregate.accepted < resolved.spec.realization_count {
        eprintln!(
            "{}",
            serde_json::json!({
                "warning": "under_populated",
                "accepted": aggregate.accepted,
                "requested": resolved.spec.realization_count,
                "rejected": aggregate.rejected,
                "failed": aggregate.failed,
            })
        );
    }

    let out = &resolved.out;
    ensure_dir(out)?;
    let meta = Meta::new(&resolved.spec);
    let name = if write_profiles { "ensemble.json" } else { "sweep.json" };
    let path = out.join(name);
    write_json(&path, &meta, &aggregate).map_err(|e| io_error(&path, e))?;

    if resolved.format == FormatArg::Csv {
        write_ensemble_csv(out, &meta, &aggregate, write_profiles)?;
    }
    println!(
        "accepted {} of {} (rejected {}, failed {}); wrote {}",
        aggregate.accepted,
        resolved.spec.realization_count,
        aggregate.rejected,
        aggregate.failed,
        out.display()
    );
    Ok(())
}

fn write_ensemble_csv(
    out: &Path,
    meta: &Meta,
    aggregate: &EnsembleAggregate,
    write_profiles: bool,
) -> Result<(), CliError> {
    let rows: Vec<String> = aggregate
        .gamma_grid
        .iter()
        .enumerate()
        .map(|(gi, &gamma)| {
            format!(
                "{},{},{},{},{},{}",
                gamma,
                aggregate.low_mean_delta[gi],
                aggregate.high_mean_delta[gi],
                aggregate.low_stderr[gi],
                aggregate.high_stderr[gi],
                aggregate.accepted
            )
        })
        .collect();
    let path = out.join("sweep.csv");
    write_csv(
        &path,
        meta,
        &[],
        "gamma,mean_delta_low,mean_delta_high,stderr_low,stderr_high,n",
        &rows,
    )
    .map_err(|e| io_error(&path, e))?;

    let mut delta_rows = Vec::new();
    let mut decay_rows = Vec::new();
    for summary in &aggregate.per_realization {
        for (gi, &gamma) in aggregate.gamma_grid.iter().enumerate() {
            delta_rows.push(format!(
                "{},{},{}",
                summary.realization_index, gamma, summary.deltas[gi]
            ));
            for &(fraction, time) in &summary.decay_times[gi] {
                decay_rows.push(format!(
                    "{},{},{},{}",
                    summary.realization_index,
                    gamma,
                    fraction,
                    cell(time)
                ));
            }
        }
    }
    let path = out.join("deltas.csv");
    write_csv(&path, meta, &[], "realization_index,gamma,delta", &delta_rows)
        .map_err(|e| io_error(&path, e))?;
    let path = out.join("decay_times.csv");
    write_csv(
        &path,
        meta,
        &[],
        "realization_index,gamma,fraction,time",
        &decay_rows,
    )
    .map_err(|e| io_error(&path, e))?;

    if write_profiles {
        for profile in &aggregate.mean_profiles {
            let extra = vec![
                format!("gamma: {}", profile.gamma),
                format!("fraction: {}", profile.fraction),
                format!("contributors: {}", profile.contributors),
                format!("time: {}", cell(profile.time)),
            ];
            let rows: Vec<String> = profile
                .populations
                .iter()
                .enumerate()
                .map(|(x, &p)| format!("{},{}", x + 1, p))
                .collect();
            let path = out.join(format!(
                "mean_profile_{:e}_{}.csv",
                profile.gamma, profile.fraction
            ));
            write_csv(&path, meta, &extra, "site,population", &rows)
                .map_err(|e| io_error(&path, e))?;
        }
    }
    Ok(())
}

fn parse_profile(text: &str) -> Result<Vec<f64>, CliError> {
    let mut populations = Vec::new();
    let mut header_skipped = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value = line.rsplit(',').next().unwrap_or(line).trim();
        match value.parse::<f64>() {
            Ok(v) => populations.push(v),
            Err(_) if populations.is_empty() && !header_skipped => header_skipped = true,
            Err(_) => {
                return Err(CliError::Config(format!(
                    "line {}: cannot parse {value:?} as a number",
                    lineno + 1
                )))
            }
        }
    }
    if populations.is_empty() {
        return Err(CliError::Config("input has no data rows".into()));
    }
    Ok(populations)
}

fn cmd_peaks(args: PeaksArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.input.display())))?;
    let populations = parse_profile(&text)?;
    let floor = args.floor.unwrap_or(DEFAULT_PEAK_FLOOR);
    let profile = OccupationProfile {
        populations,
        time: 0.0,
    };
    let records = peak_records(&profile, floor);

    #[derive(Serialize)]
    struct PeaksConfig<'a> {
        input: &'a str,
        floor: f64,
    }
    let input_name = args.input.to_string_lossy();
    let meta = Meta::new(&PeaksConfig {
        input: &input_name,
        floor,
    });
    let out = args.out.unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&out)?;
    let path = out.join("peaks.json");
    write_json(&path, &meta, &records).map_err(|e| io_error(&path, e))?;

    if args.format.unwrap_or(FormatArg::Csv) == FormatArg::Csv {
        let rows: Vec<String> = records
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.site + 1,
                    r.height,
                    r.left_prominence,
                    r.right_prominence,
                    r.prominence
                )
            })
            .collect();
        let path = out.join("peaks.csv");
        write_csv(
            &path,
            &meta,
            &[],
            "site,height,left_prominence,right_prominence,prominence",
            &rows,
        )
        .map_err(|e| io_error(&path, e))?;
    }
    println!("{} peaks; wrote {}", records.len(), out.display());
    Ok(())
}
