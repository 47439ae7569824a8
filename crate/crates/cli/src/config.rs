//! Layered run configuration: TOML file, then flag overrides, resolved
//! into an [`EnsembleSpec`] plus run-level settings.

use crate::CliError;
use anderson_dephase::{EngineChoice, EnsembleSpec, ModelConfig, SnapshotMode};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sites: Option<usize>,
    pub tunneling: Option<f64>,
    pub disorder: Option<f64>,
    /// Distance-profile exponent; 0 selects the uniform profile.
    pub q: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub realizations: Option<usize>,
    pub gamma_grid: Option<Vec<f64>>,
    pub com_window: Option<[f64; 2]>,
    pub fractions: Option<Vec<f64>>,
    pub horizon_fraction: Option<f64>,
    pub rate_horizon: Option<f64>,
    pub step_budget: Option<usize>,
    /// "per_realization" or "ensemble_mean".
    pub snapshot_mode: Option<String>,
    pub common_horizon: Option<f64>,
    pub reference_gamma: Option<f64>,
    pub max_attempts: Option<usize>,
    /// "auto", "full", or "rate".
    pub engine: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub gamma: Option<f64>,
    pub realization: Option<u64>,
    pub out: Option<PathBuf>,
    /// "csv" or "json".
    pub format: Option<String>,
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineArg {
    Auto,
    Full,
    Rate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// TOML config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for disorder sampling
    #[arg(long)]
    pub seed: Option<u64>,
    /// Chain length
    #[arg(long)]
    pub sites: Option<usize>,
    /// Dephasing rate; for ensemble/sweep it replaces the rate grid
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Distance-profile exponent; 0 selects the uniform profile
    #[arg(long)]
    pub q: Option<u32>,
    /// Evolution engine
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (ANDERSON_DEPHASE_THREADS is the fallback; 0 = automatic)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output format
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Number of accepted disorder realizations
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Disorder realization index (evolve)
    #[arg(long)]
    pub realization: Option<u64>,
}

/// Everything a subcommand needs after merging config and flags.
#[derive(Debug)]
pub struct Resolved {
    pub spec: EnsembleSpec,
    /// Single rate for evolve; also collapses ensemble grids when set.
    pub gamma: Option<f64>,
    pub realization: u64,
    pub out: PathBuf,
    pub format: FormatArg,
    pub threads: Option<usize>,
}

fn parse_engine(s: &str) -> Result<EngineChoice, CliError> {
    match s {
        "auto" => Ok(EngineChoice::Auto),
        "full" => Ok(EngineChoice::Full),
        "rate" => Ok(EngineChoice::Rate),
        other => Err(CliError::Config(format!(
            "engine must be auto, full, or rate (got {other:?})"
        ))),
    }
}

fn parse_snapshot_mode(s: &str) -> Result<SnapshotMode, CliError> {
    match s {
        "per_realization" => Ok(SnapshotMode::PerRealization),
        "ensemble_mean" => Ok(SnapshotMode::EnsembleMean),
        other => Err(CliError::Config(format!(
            "snapshot_mode must be per_realization or ensemble_mean (got {other:?})"
        ))),
    }
}

fn env_threads() -> Result<Option<usize>, CliError> {
    match std::env::var("ANDERSON_DEPHASE_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("ANDERSON_DEPHASE_THREADS = {v:?} is not an integer"))),
        Err(_) => Ok(None),
    }
}

pub fn resolve(args: &CommonArgs) -> Result<Resolved, CliError> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let sites = args.sites.or(file.model.sites).unwrap_or(128);
    let mut model = ModelConfig::new(sites);
    if let Some(t) = file.model.tunneling {
        model.tunneling = t;
        model.disorder_amplitude = t / 10.0;
    }
    if let Some(w) = file.model.disorder {
        model.disorder_amplitude = w;
    }
    model.profile_exponent = args.q.or(file.model.q).unwrap_or(1);
    model.master_seed = args.seed.or(file.model.seed).unwrap_or(0);

    let gamma = args.gamma.or(file.run.gamma);
    if let Some(g) = gamma {
        if !g.is_finite() || g < 0.0 {
            return Err(CliError::Config(format!("gamma = {g} (need a finite value >= 0)")));
        }
        model.dephasing_rate = g;
    }

    let mut spec = EnsembleSpec::new(model);
    let e = &file.ensemble;
    if let Some(r) = e.realizations.or(args.realizations) {
        spec.realization_count = r;
    }
    if let Some(grid) = &e.gamma_grid {
        spec.gamma_grid = grid.clone();
    }
    if let Some(g) = gamma {
        // a single explicit rate overrides any grid
        spec.gamma_grid = vec![g];
    }
    if let Some([lo, hi]) = e.com_window {
        spec.com_window = (lo, hi);
    }
    if let Some(f) = &e.fractions {
        spec.snapshot_fractions = f.clone();
    }
    if let Some(h) = e.horizon_fraction {
        spec.horizon_fraction = h;
    }
    if let Some(h) = e.rate_horizon {
        spec.rate_horizon = h;
    }
    if let Some(b) = e.step_budget {
        spec.step_budget = b;
    }
    if let Some(m) = &e.snapshot_mode {
        spec.snapshot_mode = parse_snapshot_mode(m)?;
    }
    spec.common_horizon = e.common_horizon.or(spec.common_horizon);
    spec.reference_gamma = e.reference_gamma.or(spec.reference_gamma);
    spec.max_attempts = e.max_attempts.or(spec.max_attempts);
    spec.engine_override = match args.engine {
        Some(EngineArg::Auto) => EngineChoice::Auto,
        Some(EngineArg::Full) => EngineChoice::Full,
        Some(EngineArg::Rate) => EngineChoice::Rate,
        None => match &e.engine {
            Some(s) => parse_engine(s)?,
            None => EngineChoice::Auto,
        },
    };

    let out = args
        .out
        .clone()
        .or(file.run.out)
        .unwrap_or_else(|| spec.output_dir.clone());
    spec.output_dir = out.clone();

    let format = match args.format {
        Some(f) => f,
        None => match file.run.format.as_deref() {
            Some("csv") => FormatArg::Csv,
            Some("json") => FormatArg::Json,
            Some(other) => {
                return Err(CliError::Config(format!(
                    "format must be csv or json (got {other:?})"
                )))
            }
            None => FormatArg::Csv,
        },
    };

    let threads = match args.threads.or(file.run.threads) {
        Some(t) => Some(t),
        None => env_threads()?,
    };

    Ok(Resolved {
        spec,
        gamma,
        realization: args.realization.or(file.run.realization).unwrap_or(0),
        out,
        format,
        threads,
    })
}
