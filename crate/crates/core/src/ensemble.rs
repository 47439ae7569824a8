//! Disorder-ensemble orchestration: center-of-mass screening, seeded
//! parallel realization runs across a dephasing-rate grid, the median
//! sub-ensemble split, and aggregation of mean profiles and prominence
//! statistics.
//!
//! Determinism contract: every run is a pure function of
//! `(master_seed, realization_index, gamma)`, tasks are collected in a
//! fixed order, and all reductions are compensated and sequential over
//! that order, so aggregates are bit-identical at any worker count.

use crate::dd::Neumaier;
use crate::dephasing::{coupling_matrix, power_law_profile, uniform_profile, DephasingProfile};
use crate::evolution::{
    integrate_master, rate_decay_time, rate_trajectory, select_engine, DecayRecord, DensityMatrix,
    Engine, EngineChoice, EvolutionError, IntegrationOptions, RatePropagator, StopReason,
    Trajectory,
};
use crate::lattice::{
    build_hamiltonian, center_of_mass, diagonalize, ground_state_direct, sample_disorder,
    DisorderRealization, ModelConfig, ModelError,
};
use crate::linalg::LinalgError;
use crate::peaks::{track_side_peaks, DEFAULT_TRACK_WINDOW};
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;
use thiserror::Error;

/// Density of the logarithmic sampling grid fed to the engines.
pub const SAMPLES_PER_DECADE: usize = 64;
/// Default cap on full-engine steps per (realization, rate) task.
pub const DEFAULT_STEP_BUDGET: usize = 300_000;
/// Default decay fraction that ends a run (the evolution horizon).
pub const DEFAULT_HORIZON_FRACTION: f64 = 1.0 / 16.0;
/// Default rate-engine horizon, in units of the inverse tunneling.
pub const DEFAULT_RATE_HORIZON_SCALE: f64 = 1e10;

/// Default rate grid: 30 points, logarithmic from `1e-9 T` to `T`.
pub fn default_gamma_grid(tunneling: f64) -> Vec<f64> {
    (0..30)
        .map(|k| tunneling * 10f64.powf(-9.0 + 9.0 * k as f64 / 29.0))
        .collect()
}

/// Default acceptance window: within half a site of the central site
/// (1-based positions, inclusive bounds).
pub fn default_com_window(n_sites: usize) -> (f64, f64) {
    let c = n_sites.div_ceil(2) as f64;
    (c - 0.5, c + 0.5)
}

/// Log-spaced times from `start` to `end` inclusive; a single point at
/// `end` when the span is empty.
fn log_time_grid(start: f64, end: f64, per_decade: usize) -> Vec<f64> {
    if end <= start {
        return vec![end];
    }
    let decades = (end / start).log10();
    let count = (decades * per_decade as f64).ceil() as usize;
    let mut grid = Vec::with_capacity(count + 1);
    for i in 0..count {
        let t = start * 10f64.powf(i as f64 / per_decade as f64);
        if t < end {
            grid.push(t);
        }
    }
    grid.push(end);
    grid
}

/// How the averaged profiles are snapshotted.
///
/// `PerRealization` (default) snapshots every realization at its own
/// decay-fraction crossing and averages those profiles; realization decay
/// times spread over orders of magnitude, so this is the robust reading.
/// `EnsembleMean` evolves all realizations on one common time grid,
/// averages first, and snapshots when the averaged peak itself crosses the
/// fraction; it requires `common_horizon`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotMode {
    #[default]
    PerRealization,
    EnsembleMean,
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
    #[error("reference rate {gamma} is not on the gamma grid")]
    MissingReference { gamma: f64 },
    #[error("no realization accepted after {attempted} attempts ({rejected} rejected, {failed} failed)")]
    NoAccepted {
        attempted: usize,
        rejected: usize,
        failed: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

/// Everything an ensemble run needs. Build with [`EnsembleSpec::new`] and
/// override fields; [`run_ensemble`] validates before running.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSpec {
    pub model: ModelConfig,
    pub realization_count: usize,
    /// Inclusive center-of-mass acceptance window, 1-based positions.
    pub com_window: (f64, f64),
    /// Dephasing rates to sweep, ascending.
    pub gamma_grid: Vec<f64>,
    pub profile: DephasingProfile,
    pub engine_override: EngineChoice,
    /// Where CLI drivers place this run's files; unused by the library
    /// and excluded from serialized configs so that runs into different
    /// directories hash and compare identically.
    #[serde(skip)]
    pub output_dir: PathBuf,
    /// Decay fractions snapshotted into mean profiles, default 1/2, 1/4, 1/8.
    pub snapshot_fractions: Vec<f64>,
    /// Fraction whose crossing ends a run.
    pub horizon_fraction: f64,
    /// Absolute time cap for rate-engine decay searches.
    pub rate_horizon: f64,
    /// Step cap per full-engine task; runs report `StopReason::StepBudget`
    /// when it binds.
    pub step_budget: usize,
    pub snapshot_mode: SnapshotMode,
    /// Common sampling horizon, required for `SnapshotMode::EnsembleMean`.
    pub common_horizon: Option<f64>,
    /// Rate the sub-ensemble split sorts by; defaults to the grid minimum.
    pub reference_gamma: Option<f64>,
    /// Screening cap; defaults to `10_000 * realization_count`.
    pub max_attempts: Option<usize>,
}

impl EnsembleSpec {
    /// Defaults for one realization of `model`: full default gamma grid,
    /// central acceptance window, power-law profile from the model's
    /// exponent (`0` selects the uniform profile).
    pub fn new(model: ModelConfig) -> EnsembleSpec {
        let profile = if model.profile_exponent == 0 {
            uniform_profile()
        } else {
            power_law_profile(model.profile_exponent)
        };
        EnsembleSpec {
            com_window: default_com_window(model.n_sites),
            gamma_grid: default_gamma_grid(model.tunneling),
            profile,
            engine_override: EngineChoice::Auto,
            output_dir: PathBuf::from("out"),
            snapshot_fractions: vec![0.5, 0.25, 0.125],
            horizon_fraction: DEFAULT_HORIZON_FRACTION,
            rate_horizon: DEFAULT_RATE_HORIZON_SCALE / model.tunneling,
            step_budget: DEFAULT_STEP_BUDGET,
            snapshot_mode: SnapshotMode::default(),
            common_horizon: None,
            reference_gamma: None,
            max_attempts: None,
            realization_count: 1,
            model,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        self.model.validate()?;
        let fail = |msg: &str| Err(EnsembleError::InvalidSpec(msg.into()));
        if self.realization_count < 1 {
            return fail("realization_count must be at least 1");
        }
        if self.gamma_grid.is_empty() {
            return fail("gamma_grid must not be empty");
        }
        if self.gamma_grid.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return fail("gamma_grid entries must be positive and finite");
        }
        if self.gamma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("gamma_grid must be strictly ascending");
        }
        if self.com_window.0 > self.com_window.1 {
            return fail("com_window bounds are reversed");
        }
        let bad_fraction = |f: f64| !(f > 0.0 && f < 1.0);
        if self.snapshot_fractions.iter().any(|&f| bad_fraction(f)) {
            return fail("snapshot fractions must lie in (0, 1)");
        }
        if bad_fraction(self.horizon_fraction) {
            return fail("horizon fraction must lie in (0, 1)");
        }
        if !self.rate_horizon.is_finite() || self.rate_horizon <= 0.0 {
            return fail("rate horizon must be positive and finite");
        }
        if self.step_budget == 0 {
            return fail("step budget must be positive");
        }
        if self.snapshot_mode == SnapshotMode::EnsembleMean
            && !matches!(self.common_horizon, Some(h) if h > 0.0)
        {
            return fail("ensemble-mean snapshots need a positive common_horizon");
        }
        Ok(())
    }

    fn effective_max_attempts(&self) -> usize {
        self.max_attempts
            .unwrap_or_else(|| self.realization_count.saturating_mul(10_000))
    }
}

/// One (realization, rate) task's serializable summary.
#[derive(Clone, Debug, Serialize)]
pub struct RealizationRecord {
    pub realization_index: u64,
    pub gamma: f64,
    pub engine: Engine,
    /// Largest side-peak prominence growth over the run.
    pub delta: f64,
    pub decays: Vec<DecayRecord>,
    pub stop: StopReason,
}

/// Full task output: the summary plus the trajectory it was read from.
#[derive(Debug)]
pub struct RealizationOutcome {
    pub record: RealizationRecord,
    pub trajectory: Trajectory,
}

/// One realization's results across the whole gamma grid.
#[derive(Clone, Debug, Serialize)]
pub struct RealizationSummary {
    pub realization_index: u64,
    /// Delta per gamma-grid entry.
    pub deltas: Vec<f64>,
    /// Per gamma-grid entry: (fraction, crossing time) pairs.
    pub decay_times: Vec<Vec<(f64, Option<f64>)>>,
}

/// Ensemble-averaged site profile for one (gamma, fraction) pair.
#[derive(Clone, Debug, Serialize)]
pub struct MeanProfile {
    pub gamma: f64,
    pub fraction: f64,
    pub populations: Vec<f64>,
    /// Realizations that reached this fraction and were averaged.
    pub contributors: usize,
    /// `EnsembleMean` mode: the common time at which the averaged peak
    /// crossed the fraction. `PerRealization` mode: `None` (each
    /// contributor was snapshotted at its own crossing).
    pub time: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleAggregate {
    pub gamma_grid: Vec<f64>,
    pub snapshot_fractions: Vec<f64>,
    pub snapshot_mode: SnapshotMode,
    pub mean_profiles: Vec<MeanProfile>,
    pub per_realization: Vec<RealizationSummary>,
    /// Sub-ensemble mean delta per gamma-grid entry; 0 for an empty half.
    pub low_mean_delta: Vec<f64>,
    pub high_mean_delta: Vec<f64>,
    /// Standard error of the mean per gamma-grid entry; 0 below two samples.
    pub low_stderr: Vec<f64>,
    pub high_stderr: Vec<f64>,
    pub low_indices: Vec<u64>,
    pub high_indices: Vec<u64>,
    pub reference_gamma: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub failed: usize,
    pub attempted: usize,
    pub accepted_indices: Vec<u64>,
    pub failures: Vec<(u64, String)>,
}

/// Center-of-mass screen: true iff the ground state of this realization
/// sits inside `window` (inclusive). The config must already be valid;
/// screening itself cannot fail.
pub fn accept_realization(
    disorder: &DisorderRealization,
    config: &ModelConfig,
    window: (f64, f64),
) -> bool {
    let ham = build_hamiltonian(disorder, config).expect("screening needs a valid model config");
    let ground =
        ground_state_direct(&ham).expect("tridiagonal ground state converges for finite inputs");
    let com = center_of_mass(&ground);
    window.0 <= com && com <= window.1
}

/// Run the full pipeline for one (realization, rate) task: disorder →
/// Hamiltonian → spectrum → engine → trajectory → prominence and decay
/// records. Deterministic in `(master_seed, realization_index, gamma)`.
pub fn run_realization(
    spec: &EnsembleSpec,
    realization_index: u64,
    gamma: f64,
) -> Result<RealizationOutcome, EnsembleError> {
    let model = &spec.model;
    let disorder = sample_disorder(model, realization_index);
    let ham = build_hamiltonian(&disorder, model)?;
    let sd = diagonalize(&ham)?;
    let tun = model.tunneling;
    let engine = select_engine(gamma, tun, spec.engine_override);

    let mut fractions = spec.snapshot_fractions.clone();
    fractions.push(spec.horizon_fraction);
    let t_start = 0.1 / tun;
    let common = match (spec.snapshot_mode, spec.common_horizon) {
        (SnapshotMode::EnsembleMean, Some(h)) => Some(h),
        _ => None,
    };

    let trajectory = match engine {
        Engine::RateEquation => {
            let eta = coupling_matrix(&sd, &spec.profile);
            let prop = RatePropagator::new(&eta)?;
            // Prepared in the ground state: exactly one eigenbasis slot.
            let mut p0 = vec![0.0; model.n_sites];
            p0[0] = 1.0;
            let t_end = match common {
                Some(h) => h,
                None => rate_decay_time(
                    &prop,
                    &sd,
                    &p0,
                    gamma,
                    spec.horizon_fraction,
                    spec.rate_horizon,
                    DEFAULT_TRACK_WINDOW,
                )
                .unwrap_or(spec.rate_horizon),
            };
            let targets = log_time_grid(t_start, t_end, SAMPLES_PER_DECADE);
            rate_trajectory(
                &prop,
                &sd,
                &p0,
                gamma,
                &targets,
                &fractions,
                spec.rate_horizon,
                DEFAULT_TRACK_WINDOW,
            )
        }
        Engine::FullLindblad => {
            let rho0 = DensityMatrix::pure_state(sd.eigenvector(0));
            // Without a common horizon the grid runs far out and the
            // horizon-fraction crossing ends the run instead; with one,
            // the cap bounds the tail left by unreachable fractions.
            let (far, stop_after, cap) = match common {
                Some(h) => (h, false, Some(h * 1.25)),
                None => (spec.rate_horizon, true, None),
            };
            let targets = log_time_grid(t_start, far, SAMPLES_PER_DECADE);
            let opts = IntegrationOptions {
                step_budget: Some(spec.step_budget),
                time_cap: cap,
                stop_after_decays: stop_after,
                ..IntegrationOptions::default()
            };
            integrate_master(&rho0, &ham, &spec.profile, gamma, &targets, &fractions, &opts)?
        }
    };

    let main_site = trajectory.samples[0].argmax();
    let report = track_side_peaks(&trajectory, main_site, DEFAULT_TRACK_WINDOW);
    let record = RealizationRecord {
        realization_index,
        gamma,
        engine,
        delta: report.delta,
        decays: trajectory.decays.clone(),
        stop: trajectory.diagnostics.stop,
    };
    Ok(RealizationOutcome { record, trajectory })
}

/// Partition record positions into (low, high) halves by delta at the
/// reference rate, ascending; the median of an odd count lands in the low
/// half, and ties order by realization index.
pub fn split_subensembles(
    records: &[RealizationSummary],
    gamma_grid: &[f64],
    reference_gamma: f64,
) -> Result<(Vec<usize>, Vec<usize>), EnsembleError> {
    let gi = gamma_grid
        .iter()
        .position(|&g| (g - reference_gamma).abs() <= 1e-6 * reference_gamma.abs())
        .ok_or(EnsembleError::MissingReference {
            gamma: reference_gamma,
        })?;
    if records.iter().any(|r| r.deltas.len() <= gi) {
        return Err(EnsembleError::MissingReference {
            gamma: reference_gamma,
        });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[a].deltas[gi]
            .total_cmp(&records[b].deltas[gi])
            .then(records[a].realization_index.cmp(&records[b].realization_index))
    });
    let low_len = records.len().div_ceil(2);
    let high = order.split_off(low_len);
    Ok((order, high))
}

/// Accumulates ensemble-mean profiles over a common sampling grid.
struct SlotAccumulator {
    /// Nominal sample times; slot 0 is t = 0.
    times: Vec<f64>,
    sums: Vec<Vec<Neumaier>>,
    counts: Vec<usize>,
}

impl SlotAccumulator {
    fn new(targets: &[f64], n: usize) -> SlotAccumulator {
        let mut times = Vec::with_capacity(targets.len() + 1);
        times.push(0.0);
        times.extend_from_slice(targets);
        SlotAccumulator {
            sums: times.iter().map(|_| vec![Neumaier::new(); n]).collect(),
            counts: vec![0; times.len()],
            times,
        }
    }

    /// Match samples to slots: each slot takes the first sample at or past
    /// its nominal time (rate-engine samples land exactly on it; the full
    /// engine overshoots by less than one step). Early-stopped runs leave
    /// later slots uncounted.
    fn add(&mut self, trajectory: &Trajectory) {
        let samples = &trajectory.samples;
        for (a, &p) in self.sums[0].iter_mut().zip(&samples[0].populations) {
            a.add(p);
        }
        self.counts[0] += 1;
        let mut si = 1;
        for k in 1..self.times.len() {
            while si < samples.len() && samples[si].time < self.times[k] {
                si += 1;
            }
            if si >= samples.len() {
                break;
            }
            for (a, &p) in self.sums[k].iter_mut().zip(&samples[si].populations) {
                a.add(p);
            }
            self.counts[k] += 1;
        }
    }

    fn mean_at(&self, k: usize) -> Vec<f64> {
        let c = self.counts[k] as f64;
        self.sums[k].iter().map(|a| a.value() / c).collect()
    }
}

fn argmax_window(v: &[f64], center: usize, window: usize) -> usize {
    let lo = center.saturating_sub(window);
    let hi = (center + window + 1).min(v.len());
    let mut best = lo;
    for x in lo + 1..hi {
        if v[x] > v[best] {
            best = x;
        }
    }
    best
}

/// Screen, run, and aggregate the ensemble. See the module docs for the
/// determinism contract; an aggregate with `accepted < realization_count`
/// reports a screening budget that ran out (not an error), while zero
/// accepted realizations is one.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleAggregate, EnsembleError> {
    spec.validate()?;
    let n = spec.model.n_sites;
    let gammas = &spec.gamma_grid;
    let g_count = gammas.len();
    let f_count = spec.snapshot_fractions.len();

    // Sequential screening: indices are attempted in order, so the accepted
    // set is independent of everything downstream.
    let max_attempts = spec.effective_max_attempts();
    let mut accepted_indices: Vec<u64> = Vec::with_capacity(spec.realization_count);
    let mut rejected = 0usize;
    let mut attempted = 0usize;
    while accepted_indices.len() < spec.realization_count && attempted < max_attempts {
        let index = attempted as u64;
        let disorder = sample_disorder(&spec.model, index);
        attempted += 1;
        if accept_realization(&disorder, &spec.model, spec.com_window) {
            accepted_indices.push(index);
        } else {
            rejected += 1;
        }
    }

    // Per-(gamma, fraction) accumulators for per-realization snapshots.
    let mut frac_sums: Vec<Vec<Neumaier>> =
        (0..g_count * f_count).map(|_| vec![Neumaier::new(); n]).collect();
    let mut frac_counts = vec![0usize; g_count * f_count];
    // Common-grid accumulators for ensemble-mean snapshots.
    let mut slot_accs: Option<Vec<SlotAccumulator>> = match (spec.snapshot_mode, spec.common_horizon)
    {
        (SnapshotMode::EnsembleMean, Some(h)) => {
            let targets = log_time_grid(0.1 / spec.model.tunneling, h, SAMPLES_PER_DECADE);
            Some((0..g_count).map(|_| SlotAccumulator::new(&targets, n)).collect())
        }
        _ => None,
    };

    let mut clean: Vec<RealizationSummary> = Vec::with_capacity(accepted_indices.len());
    let mut failures: Vec<(u64, String)> = Vec::new();

    // Fixed-size chunks bound the trajectories held in memory at once
    // without letting the worker count influence accumulation order.
    const CHUNK: usize = 16;
    for chunk in accepted_indices.chunks(CHUNK) {
        let results: Vec<(u64, Vec<Result<RealizationOutcome, EnsembleError>>)> = chunk
            .par_iter()
            .map(|&ri| {
                let outcomes = gammas
                    .iter()
                    .map(|&g| run_realization(spec, ri, g))
                    .collect();
                (ri, outcomes)
            })
            .collect();
        for (ri, outcomes) in results {
            if let Some(err) = outcomes.iter().find_map(|o| o.as_ref().err()) {
                failures.push((ri, err.to_string()));
                continue;
            }
            let mut deltas = Vec::with_capacity(g_count);
            let mut decay_times = Vec::with_capacity(g_count);
            for (gi, outcome) in outcomes.into_iter().enumerate() {
                let outcome = outcome.expect("error case handled above");
                deltas.push(outcome.record.delta);
                decay_times.push(
                    outcome
                        .record
                        .decays
                        .iter()
                        .map(|d| (d.fraction, d.time))
                        .collect(),
                );
                if let Some(accs) = slot_accs.as_mut() {
                    accs[gi].add(&outcome.trajectory);
                } else {
                    for (fi, &fraction) in spec.snapshot_fractions.iter().enumerate() {
                        let hit = outcome
                            .record
                            .decays
                            .iter()
                            .find(|d| d.fraction == fraction)
                            .and_then(|d| d.profile.as_ref());
                        if let Some(profile) = hit {
                            let cell = gi * f_count + fi;
                            for (a, &p) in
                                frac_sums[cell].iter_mut().zip(&profile.populations)
                            {
                                a.add(p);
                            }
                            frac_counts[cell] += 1;
                        }
                    }
                }
            }
            clean.push(RealizationSummary {
                realization_index: ri,
                deltas,
                decay_times,
            });
        }
    }

    let accepted = clean.len();
    let failed = failures.len();
    if accepted == 0 {
        return Err(EnsembleError::NoAccepted {
            attempted,
            rejected,
            failed,
        });
    }

    // Sub-ensemble statistics per gamma.
    let reference_gamma = spec.reference_gamma.unwrap_or(gammas[0]);
    let (low_pos, high_pos) = split_subensembles(&clean, gammas, reference_gamma)?;
    let stats = |positions: &[usize], gi: usize| -> (f64, f64) {
        if positions.is_empty() {
            return (0.0, 0.0);
        }
        let m = positions.len() as f64;
        let mut sum = Neumaier::new();
        for &p in positions {
            sum.add(clean[p].deltas[gi]);
        }
        let mean = sum.value() / m;
        if positions.len() < 2 {
            return (mean, 0.0);
        }
        let mut sq = Neumaier::new();
        for &p in positions {
            let d = clean[p].deltas[gi] - mean;
            sq.add(d * d);
        }
        let var = sq.value() / (m - 1.0);
        (mean, (var / m).sqrt())
    };
    let mut low_mean_delta = Vec::with_capacity(g_count);
    let mut low_stderr = Vec::with_capacity(g_count);
    let mut high_mean_delta = Vec::with_capacity(g_count);
    let mut high_stderr = Vec::with_capacity(g_count);
    for gi in 0..g_count {
        let (m, s) = stats(&low_pos, gi);
        low_mean_delta.push(m);
        low_stderr.push(s);
        let (m, s) = stats(&high_pos, gi);
        high_mean_delta.push(m);
        high_stderr.push(s);
    }

    // Mean profiles per the snapshot mode.
    let mut mean_profiles = Vec::new();
    match slot_accs {
        None => {
            for (gi, &gamma) in gammas.iter().enumerate() {
                for (fi, &fraction) in spec.snapshot_fractions.iter().enumerate() {
                    let cell = gi * f_count + fi;
                    if frac_counts[cell] == 0 {
                        continue;
                    }
                    let c = frac_counts[cell] as f64;
                    mean_profiles.push(MeanProfile {
                        gamma,
                        fraction,
                        populations: frac_sums[cell].iter().map(|a| a.value() / c).collect(),
                        contributors: frac_counts[cell],
                        time: None,
                    });
                }
            }
        }
        Some(accs) => {
            let mut order: Vec<f64> = spec.snapshot_fractions.clone();
            order.sort_by(|a, b| b.partial_cmp(a).unwrap());
            order.dedup();
            for (gi, acc) in accs.iter().enumerate() {
                // Only slots every clean realization reached are comparable.
                let covered = acc.counts.iter().take_while(|&&c| c == accepted).count();
                if covered == 0 {
                    continue;
                }
                let initial = acc.mean_at(0);
                let mut site = argmax_window(&initial, initial.len() / 2, initial.len());
                let h0 = initial[site];
                let mut pending = order.iter().copied().peekable();
                for k in 1..covered {
                    let profile = acc.mean_at(k);
                    site = argmax_window(&profile, site, DEFAULT_TRACK_WINDOW);
                    let height = profile[site];
                    let mut crossed = false;
                    while let Some(&fraction) = pending.peek() {
                        if height > fraction * h0 {
                            break;
                        }
                        mean_profiles.push(MeanProfile {
                            gamma: gammas[gi],
                            fraction,
                            populations: profile.clone(),
                            contributors: acc.counts[k],
                            time: Some(acc.times[k]),
                        });
                        pending.next();
                        crossed = true;
                    }
                    if crossed && pending.peek().is_none() {
                        break;
                    }
                }
            }
        }
    }

    Ok(EnsembleAggregate {
        gamma_grid: gammas.clone(),
        snapshot_fractions: spec.snapshot_fractions.clone(),
        snapshot_mode: spec.snapshot_mode,
        mean_profiles,
        low_indices: low_pos.iter().map(|&p| clean[p].realization_index).collect(),
        high_indices: high_pos.iter().map(|&p| clean[p].realization_index).collect(),
        per_realization: clean,
        low_mean_delta,
        high_mean_delta,
        low_stderr,
        high_stderr,
        reference_gamma,
        accepted,
        rejected,
        failed,
        attempted,
        accepted_indices,
        failures,
    })
}
