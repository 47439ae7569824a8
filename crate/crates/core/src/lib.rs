//! Simulation toolkit for a one-dimensional disordered tight-binding chain
//! subject to distance-dependent dephasing.
//!
//! The crate is organized around five concerns:
//!
//! * [`lattice`] — disorder sampling, chain Hamiltonians, spectral
//!   decompositions, clean-chain modes, and occupation profiles.
//! * [`dephasing`] — dephasing profiles `f(x, y)`, the Lindblad dissipator,
//!   and the eigenbasis coupling matrix `eta`.
//! * [`evolution`] — the two propagation engines: fixed-step RK4 integration
//!   of the full master equation, and the exact rate-equation solution in the
//!   energy eigenbasis for slow dephasing.
//! * [`peaks`] — topographic peak prominence, side-peak tracking over a
//!   trajectory, and the growth statistics `G` and `Delta`.
//! * [`ensemble`] — seeded disorder ensembles with a center-of-mass filter,
//!   gamma sweeps, and the median sub-ensemble split.
//!
//! Supporting numerics live in [`linalg`] (symmetric eigensolvers) and
//! [`dd`] (compensated and double-double accumulation).

pub mod dd;
pub mod dephasing;
pub mod ensemble;
pub mod evolution;
pub mod lattice;
pub mod linalg;
pub mod peaks;

pub use dephasing::{
    coupling_matrix, coupling_matrix_banded, dissipator_apply, power_law_profile,
    quadratic_form_kernel, quadratic_form_kernel_pairwise, uniform_profile, DephasingProfile,
    RateMatrix,
};
pub use ensemble::{
    accept_realization, default_com_window, default_gamma_grid, run_ensemble, run_realization,
    split_subensembles, EnsembleAggregate, EnsembleError, EnsembleSpec, MeanProfile,
    RealizationOutcome, RealizationRecord, RealizationSummary, SnapshotMode,
};
pub use evolution::{
    integrate_master, lindblad_rhs, rate_decay_time, rate_matrix_propagator, rate_trajectory,
    select_engine, site_populations, DecayRecord, DensityMatrix, Engine, EngineChoice,
    EvolutionError, IntegrationDiagnostics, IntegrationOptions, PopulationVector, RatePropagator,
    StopReason, Trajectory, DEFAULT_GAMMA_SWITCH_RATIO,
};
pub use lattice::{
    build_hamiltonian, center_of_mass, clean_chain_modes, diagonalize, ground_state,
    ground_state_direct, sample_disorder, CleanChainModes, DisorderRealization,
    LatticeHamiltonian, ModelConfig, OccupationProfile, SpectralDecomposition,
};
pub use peaks::{
    find_peaks, peak_records, prominence, track_side_peaks, PeakError, PeakRecord, PeakTrack,
    ProminenceReport, DEFAULT_PEAK_FLOOR, DEFAULT_TRACK_WINDOW,
};
