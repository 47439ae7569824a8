//! Disordered chain construction and spectral decomposition.
//!
//! Site indexing is 1-based in the physics formulas (wave numbers, center of
//! mass) and 0-based in storage; the conversion stays inside this module.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: disorder has {got} sites, config expects {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Physical and sampling parameters of one model instance.
///
/// `tunneling` sets the energy scale; `disorder_amplitude` is the half-width
/// `W` of the uniform onsite-energy distribution; `profile_exponent` is the
/// power `q` of the dephasing profile `|x-y|^q`; `dephasing_rate` is `gamma`
/// in the same energy units as the tunneling.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub tunneling: f64,
    pub disorder_amplitude: f64,
    pub profile_exponent: u32,
    pub dephasing_rate: f64,
    pub master_seed: u64,
}

impl ModelConfig {
    /// Defaults: unit tunneling, disorder half-width of a tenth of the
    /// tunneling, linear profile, no dephasing, seed 0.
    pub fn new(n_sites: usize) -> ModelConfig {
        ModelConfig {
            n_sites,
            tunneling: 1.0,
            disorder_amplitude: 0.1,
            profile_exponent: 1,
            dephasing_rate: 0.0,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_sites < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "n_sites = {} (need at least 2)",
                self.n_sites
            )));
        }
        // NaN fails the finiteness clause, so the comparisons only ever see
        // ordered values.
        if !self.tunneling.is_finite() || self.tunneling <= 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "tunneling = {} (need > 0)",
                self.tunneling
            )));
        }
        if !self.disorder_amplitude.is_finite() || self.disorder_amplitude < 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "disorder_amplitude = {} (need >= 0)",
                self.disorder_amplitude
            )));
        }
        if !self.dephasing_rate.is_finite() || self.dephasing_rate < 0.0 {
            return Err(ModelError::InvalidConfig(format!(
                "dephasing_rate = {} (need >= 0)",
                self.dephasing_rate
            )));
        }
        Ok(())
    }
}

/// One draw of the onsite energies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub onsite_energies: Vec<f64>,
    pub master_seed: u64,
    pub realization_index: u64,
}

/// Sample onsite energies i.i.d. uniform on `[-W, W]`.
///
/// The stream of realization `k` is independent of, and insensitive to the
/// presence of, every other realization: the generator is keyed by
/// `(master_seed, k)` so ensemble members can be drawn in any order or in
/// parallel.
pub fn sample_disorder(config: &ModelConfig, realization_index: u64) -> DisorderRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(realization_index);
    let w = config.disorder_amplitude;
    let onsite_energies = if w == 0.0 {
        vec![0.0; config.n_sites]
    } else {
        let dist = Uniform::new_inclusive(-w, w).expect("valid disorder interval");
        (0..config.n_sites).map(|_| dist.sample(&mut rng)).collect()
    };
    DisorderRealization {
        onsite_energies,
        master_seed: config.master_seed,
        realization_index,
    }
}

/// Real symmetric tridiagonal chain Hamiltonian with open boundaries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeHamiltonian {
    pub diagonal: Vec<f64>,
    pub off_diagonal: f64,
}

impl LatticeHamiltonian {
    pub fn n_sites(&self) -> usize {
        self.diagonal.len()
    }

    /// Matrix element (i, j); zero beyond the first off-diagonal, so the open
    /// boundary shows up as `element(0, n-1) == 0`.
    pub fn element(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diagonal[i]
        } else if i.abs_diff(j) == 1 {
            self.off_diagonal
        } else {
            0.0
        }
    }

    /// An upper bound on the spectral norm (Gershgorin).
    pub fn norm_bound(&self) -> f64 {
        let dmax = self.diagonal.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        dmax + 2.0 * self.off_diagonal.abs()
    }
}

pub fn build_hamiltonian(
    disorder: &DisorderRealization,
    config: &ModelConfig,
) -> Result<LatticeHamiltonian, ModelError> {
    config.validate()?;
    if disorder.onsite_energies.len() != config.n_sites {
        return Err(ModelError::LengthMismatch {
            got: disorder.onsite_energies.len(),
            want: config.n_sites,
        });
    }
    Ok(LatticeHamiltonian {
        diagonal: disorder.onsite_energies.clone(),
        off_diagonal: config.tunneling,
    })
}

/// Full set of eigenpairs of a chain Hamiltonian.
///
/// Eigenvalues ascend; eigenvector `i` is `eigenvectors[i*n..(i+1)*n]`, real,
/// orthonormal, sign-fixed (largest-magnitude component positive).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<f64>,
    pub n: usize,
}

impl SpectralDecomposition {
    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.eigenvectors[i * self.n..(i + 1) * self.n]
    }
}

pub fn diagonalize(h: &LatticeHamiltonian) -> Result<SpectralDecomposition, LinalgError> {
    let n = h.n_sites();
    let off = vec![h.off_diagonal; n - 1];
    let eig = linalg::eigh_tridiagonal(&h.diagonal, &off)?;
    Ok(SpectralDecomposition {
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        n,
    })
}

/// Site-occupation probabilities at one instant, `time` in units of the
/// inverse tunneling.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OccupationProfile {
    pub populations: Vec<f64>,
    pub time: f64,
}

impl OccupationProfile {
    pub fn total(&self) -> f64 {
        crate::dd::sum(&self.populations)
    }

    /// Site of the largest population (first on ties), 0-based.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.populations.iter().enumerate() {
            if p > self.populations[best] {
                best = i;
            }
        }
        best
    }

    /// Copy with tiny negative round-off clamped to zero, for output paths.
    pub fn clamped(&self) -> Vec<f64> {
        self.populations.iter().map(|&p| p.max(0.0)).collect()
    }
}

/// Ground-state occupation `|psi_0(x)|^2` (lowest eigenvalue's vector).
pub fn ground_state(spec: &SpectralDecomposition) -> OccupationProfile {
    let v = spec.eigenvector(0);
    OccupationProfile {
        populations: v.iter().map(|c| c * c).collect(),
        time: 0.0,
    }
}

/// Ground-state occupation straight from the Hamiltonian, without the full
/// decomposition: QL eigenvalues plus one inverse iteration. This is the
/// cheap path for center-of-mass screening of many candidate realizations.
pub fn ground_state_direct(h: &LatticeHamiltonian) -> Result<OccupationProfile, LinalgError> {
    let n = h.n_sites();
    let off = vec![h.off_diagonal; n - 1];
    let (_, v) = linalg::tridiagonal_ground_state(&h.diagonal, &off)?;
    Ok(OccupationProfile {
        populations: v.iter().map(|c| c * c).collect(),
        time: 0.0,
    })
}

/// Center of mass with sites counted 1..=N.
pub fn center_of_mass(p: &OccupationProfile) -> f64 {
    let mut acc = crate::dd::Neumaier::new();
    for (i, &pop) in p.populations.iter().enumerate() {
        acc.add((i as f64 + 1.0) * pop);
    }
    acc.value()
}

/// Analytic modes of the clean (disorder-free) chain.
///
/// Wave numbers follow the printed convention `k_i = i*pi/(N+1) + pi` with
/// `i = 1..=N`; the additive `pi` flips alternating signs relative to the
/// textbook `i*pi/(N+1)` convention but leaves every `|phi_i(x)|^2`
/// unchanged. Energies are `2*T*cos(k_i)`, which this convention already
/// orders ascending in `i`.
#[derive(Clone, Debug)]
pub struct CleanChainModes {
    pub wave_numbers: Vec<f64>,
    pub energies: Vec<f64>,
    pub n: usize,
}

impl CleanChainModes {
    /// Mode amplitude at a 0-based site, printed convention.
    pub fn mode_shape(&self, mode: usize, site: usize) -> f64 {
        let norm = (2.0 / (self.n as f64 + 1.0)).sqrt();
        norm * (self.wave_numbers[mode] * (site as f64 + 1.0)).sin()
    }

    /// Mode amplitude in the unshifted convention `k = i*pi/(N+1)`.
    pub fn mode_shape_unshifted(&self, mode: usize, site: usize) -> f64 {
        let k = self.wave_numbers[mode] - std::f64::consts::PI;
        let norm = (2.0 / (self.n as f64 + 1.0)).sqrt();
        norm * (k * (site as f64 + 1.0)).sin()
    }
}

pub fn clean_chain_modes(n_sites: usize, tunneling: f64) -> CleanChainModes {
    let nf = n_sites as f64 + 1.0;
    let wave_numbers: Vec<f64> = (1..=n_sites)
        .map(|i| i as f64 * std::f64::consts::PI / nf + std::f64::consts::PI)
        .collect();
    let energies: Vec<f64> = wave_numbers
        .iter()
        .map(|k| 2.0 * tunneling * k.cos())
        .collect();
    CleanChainModes {
        wave_numbers,
        energies,
        n: n_sites,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disorder_is_deterministic_and_bounded() {
        let cfg = ModelConfig {
            master_seed: 42,
            ..ModelConfig::new(64)
        };
        let a = sample_disorder(&cfg, 7);
        let b = sample_disorder(&cfg, 7);
        assert_eq!(a.onsite_energies, b.onsite_energies);
        let c = sample_disorder(&cfg, 8);
        assert_ne!(a.onsite_energies, c.onsite_energies);
        for &e in &a.onsite_energies {
            assert!(e.abs() <= cfg.disorder_amplitude);
        }
    }

    #[test]
    fn zero_amplitude_gives_clean_chain() {
        let cfg = ModelConfig {
            disorder_amplitude: 0.0,
            ..ModelConfig::new(16)
        };
        let d = sample_disorder(&cfg, 3);
        assert!(d.onsite_energies.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn hamiltonian_has_open_boundary() {
        let cfg = ModelConfig::new(10);
        let h = build_hamiltonian(&sample_disorder(&cfg, 0), &cfg).unwrap();
        assert_eq!(h.element(0, 9), 0.0);
        assert_eq!(h.element(9, 0), 0.0);
        assert_eq!(h.element(3, 4), cfg.tunneling);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let cfg = ModelConfig::new(10);
        let d = sample_disorder(&cfg, 0);
        let bad = ModelConfig::new(11);
        assert!(matches!(
            build_hamiltonian(&d, &bad),
            Err(ModelError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn small_clean_chain_eigenvalues() {
        struct Case {
            n: usize,
            want: Vec<f64>,
        }
        let cases = [
            Case { n: 2, want: vec![-1.0, 1.0] },
            Case { n: 3, want: vec![-std::f64::consts::SQRT_2, 0.0, std::f64::consts::SQRT_2] },
        ];
        for c in &cases {
            let cfg = ModelConfig {
                disorder_amplitude: 0.0,
                ..ModelConfig::new(c.n)
            };
            let h = build_hamiltonian(&sample_disorder(&cfg, 0), &cfg).unwrap();
            let spec = diagonalize(&h).unwrap();
            for (got, want) in spec.eigenvalues.iter().zip(&c.want) {
                assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn clean_chain_matches_mode_formula() {
        let n = 8;
        let cfg = ModelConfig {
            disorder_amplitude: 0.0,
            ..ModelConfig::new(n)
        };
        let h = build_hamiltonian(&sample_disorder(&cfg, 0), &cfg).unwrap();
        let spec = diagonalize(&h).unwrap();
        let modes = clean_chain_modes(n, cfg.tunneling);
        for i in 0..n {
            assert!(
                (spec.eigenvalues[i] - modes.energies[i]).abs() <= 1e-10,
                "mode {i}: {} vs {}",
                spec.eigenvalues[i],
                modes.energies[i]
            );
            // shapes agree up to global sign, so compare |.|^2
            for x in 0..n {
                let a = spec.eigenvector(i)[x].powi(2);
                let b = modes.mode_shape(i, x).powi(2);
                assert!((a - b).abs() <= 1e-10, "mode {i} site {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn diagonalize_residual_on_disordered_chain() {
        let cfg = ModelConfig {
            master_seed: 5,
            ..ModelConfig::new(16)
        };
        let h = build_hamiltonian(&sample_disorder(&cfg, 1), &cfg).unwrap();
        let spec = diagonalize(&h).unwrap();
        let bound = 1e-10 * h.norm_bound();
        for i in 0..16 {
            let v = spec.eigenvector(i);
            for x in 0..16 {
                let mut hv = h.diagonal[x] * v[x];
                if x > 0 {
                    hv += h.off_diagonal * v[x - 1];
                }
                if x < 15 {
                    hv += h.off_diagonal * v[x + 1];
                }
                assert!((hv - spec.eigenvalues[i] * v[x]).abs() <= bound);
            }
        }
        for i in 0..16 {
            for j in 0..16 {
                let dot: f64 = (0..16)
                    .map(|x| spec.eigenvector(i)[x] * spec.eigenvector(j)[x])
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eigenvector_completeness_per_site() {
        let cfg = ModelConfig {
            master_seed: 12,
            ..ModelConfig::new(64)
        };
        let h = build_hamiltonian(&sample_disorder(&cfg, 4), &cfg).unwrap();
        let spec = diagonalize(&h).unwrap();
        for x in 0..64 {
            let s: f64 = (0..64).map(|i| spec.eigenvector(i)[x].powi(2)).sum();
            assert!((s - 1.0).abs() <= 1e-10, "site {x}: {s}");
        }
    }

    #[test]
    fn ground_state_is_normalized_and_localized() {
        for seed in [1u64, 2, 3] {
            let cfg = ModelConfig {
                master_seed: seed,
                ..ModelConfig::new(500)
            };
            let h = build_hamiltonian(&sample_disorder(&cfg, 0), &cfg).unwrap();
            let spec = diagonalize(&h).unwrap();
            let gs = ground_state(&spec);
            assert!((gs.total() - 1.0).abs() <= 1e-12);
            let x0 = gs.argmax();
            let peak = gs.populations[x0];
            // exponential localization: 100 sites out, the tail is negligible
            let far = gs
                .populations
                .iter()
                .enumerate()
                .filter(|(x, _)| x.abs_diff(x0) > 100)
                .fold(0.0f64, |a, (_, &p)| a.max(p));
            assert!(
                far <= 1e-8 * peak,
                "seed {seed}: far tail {far:e} vs peak {peak:e}"
            );
        }
    }

    #[test]
    fn ground_state_direct_matches_full_decomposition() {
        let cfg = ModelConfig {
            master_seed: 9,
            ..ModelConfig::new(200)
        };
        let h = build_hamiltonian(&sample_disorder(&cfg, 2), &cfg).unwrap();
        let full = ground_state(&diagonalize(&h).unwrap());
        let fast = ground_state_direct(&h).unwrap();
        for x in 0..200 {
            assert!((full.populations[x] - fast.populations[x]).abs() <= 1e-10);
        }
    }

    #[test]
    fn clean_ground_state_peaks_near_center() {
        let cfg = ModelConfig {
            disorder_amplitude: 0.0,
            ..ModelConfig::new(51)
        };
        let h = build_hamiltonian(&sample_disorder(&cfg, 0), &cfg).unwrap();
        let gs = ground_state(&diagonalize(&h).unwrap());
        assert_eq!(gs.argmax(), 25); // middle site of 51
        let modes = clean_chain_modes(51, 1.0);
        for x in 0..51 {
            let want = modes.mode_shape(0, x).powi(2);
            assert!((gs.populations[x] - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn center_of_mass_cases() {
        struct Case {
            populations: Vec<f64>,
            want: f64,
        }
        let delta = {
            let mut p = vec![0.0; 500];
            p[249] = 1.0; // site 250 in 1-based counting
            p
        };
        let cases = [
            Case { populations: delta, want: 250.0 },
            Case { populations: vec![1.0 / 500.0; 500], want: 250.5 },
            Case { populations: vec![0.5, 0.5], want: 1.5 },
        ];
        for c in &cases {
            let p = OccupationProfile {
                populations: c.populations.clone(),
                time: 0.0,
            };
            assert!((center_of_mass(&p) - c.want).abs() <= 1e-9);
        }
    }

    #[test]
    fn mode_conventions_agree_on_probability() {
        let modes = clean_chain_modes(17, 1.0);
        for i in 0..17 {
            for x in 0..17 {
                let a = modes.mode_shape(i, x).powi(2);
                let b = modes.mode_shape_unshifted(i, x).powi(2);
                assert!((a - b).abs() <= 1e-12, "mode {i} site {x}");
            }
        }
    }

    #[test]
    fn modes_are_orthonormal() {
        let n = 40;
        let modes = clean_chain_modes(n, 1.0);
        for i in 0..n {
            for j in i..n {
                let dot: f64 = (0..n)
                    .map(|x| modes.mode_shape(i, x) * modes.mode_shape(j, x))
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() <= 1e-12, "({i},{j}): {dot}");
            }
        }
    }

    #[test]
    fn n3_energies_from_printed_formula() {
        let modes = clean_chain_modes(3, 1.0);
        let want = [
            2.0 * (std::f64::consts::PI / 4.0 + std::f64::consts::PI).cos(),
            2.0 * (2.0 * std::f64::consts::PI / 4.0 + std::f64::consts::PI).cos(),
            2.0 * (3.0 * std::f64::consts::PI / 4.0 + std::f64::consts::PI).cos(),
        ];
        for (got, want) in modes.energies.iter().zip(&want) {
            assert!((got - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(ModelConfig::new(1).validate().is_err());
        assert!(ModelConfig { tunneling: 0.0, ..ModelConfig::new(4) }.validate().is_err());
        assert!(ModelConfig { tunneling: -1.0, ..ModelConfig::new(4) }.validate().is_err());
        assert!(ModelConfig { disorder_amplitude: -0.1, ..ModelConfig::new(4) }.validate().is_err());
        assert!(ModelConfig { dephasing_rate: -1e-9, ..ModelConfig::new(4) }.validate().is_err());
        assert!(ModelConfig::new(4).validate().is_ok());
    }

    proptest! {
        #[test]
        fn disorder_bounds_hold_for_any_seed(seed: u64, index in 0u64..1024) {
            let cfg = ModelConfig { master_seed: seed, ..ModelConfig::new(16) };
            let d = sample_disorder(&cfg, index);
            prop_assert_eq!(d.onsite_energies.len(), 16);
            for &e in &d.onsite_energies {
                prop_assert!(e.abs() <= cfg.disorder_amplitude);
            }
            let again = sample_disorder(&cfg, index);
            prop_assert_eq!(d.onsite_energies, again.onsite_energies);
        }
    }
}
