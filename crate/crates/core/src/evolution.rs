//! Time evolution of the open chain: density-matrix storage, the full
//! Lindblad integrator, and the eigenbasis rate-equation propagator.
//!
//! Two engines produce the same kind of [`Trajectory`]:
//!
//! * [`integrate_master`] steps the full master equation with fixed-step
//!   RK4 on the upper triangle of `rho`, exact Hermiticity by construction,
//!   and locates peak-decay crossings online between steps.
//! * [`rate_trajectory`] evaluates the slow-dephasing rate equation
//!   `p(t) = exp(-gamma eta t) p0` through one symmetric eigendecomposition
//!   of the coupling matrix, exact at any `t`, and locates decay times by
//!   exponential bracketing and bisection.
//!
//! [`select_engine`] picks between them from the dephasing rate.

use crate::dd::Neumaier;
use crate::dephasing::{DephasingProfile, RateMatrix};
use crate::lattice::{LatticeHamiltonian, OccupationProfile, SpectralDecomposition};
use crate::linalg::{self, LinalgError};
use serde::Serialize;
use thiserror::Error;

/// Dense complex density matrix, split into row-major real and imaginary
/// parts. Hermiticity is a maintained invariant, not a structural one; the
/// integrator keeps it exact by only ever deriving the lower triangle from
/// the upper one.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub n: usize,
}

impl DensityMatrix {
    pub fn zeros(n: usize) -> DensityMatrix {
        DensityMatrix {
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
            n,
        }
    }

    /// `|site><site|`, the localized initial condition.
    pub fn site_basis(n: usize, site: usize) -> DensityMatrix {
        let mut rho = DensityMatrix::zeros(n);
        rho.re[site * n + site] = 1.0;
        rho
    }

    /// Pure state `|v><v|` from real amplitudes (normalized on input).
    pub fn pure_state(v: &[f64]) -> DensityMatrix {
        let n = v.len();
        let mut rho = DensityMatrix::zeros(n);
        for x in 0..n {
            for y in 0..n {
                rho.re[x * n + y] = v[x] * v[y];
            }
        }
        rho
    }

    pub fn entry(&self, x: usize, y: usize) -> (f64, f64) {
        (self.re[x * self.n + y], self.im[x * self.n + y])
    }

    pub fn trace(&self) -> f64 {
        let mut acc = Neumaier::new();
        for x in 0..self.n {
            acc.add(self.re[x * self.n + x]);
        }
        acc.value()
    }

    /// Largest deviation from `rho = rho^dagger` over all entries.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for x in 0..n {
            worst = worst.max(self.im[x * n + x].abs());
            for y in x + 1..n {
                worst = worst.max((self.re[x * n + y] - self.re[y * n + x]).abs());
                worst = worst.max((self.im[x * n + y] + self.im[y * n + x]).abs());
            }
        }
        worst
    }

    /// Diagonal in the site basis.
    pub fn site_populations(&self) -> Vec<f64> {
        (0..self.n).map(|x| self.re[x * self.n + x]).collect()
    }

    pub fn occupation_profile(&self, time: f64) -> OccupationProfile {
        OccupationProfile {
            populations: self.site_populations(),
            time,
        }
    }

    /// Populations in an orthonormal real basis: `p_i = <psi_i|rho|psi_i>`.
    /// The imaginary part drops out for Hermitian `rho` (it is antisymmetric),
    /// so only `Re rho` enters.
    pub fn populations_in_basis(&self, spec: &SpectralDecomposition) -> Vec<f64> {
        let n = self.n;
        assert_eq!(spec.n, n, "basis dimension mismatch");
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let v = spec.eigenvector(i);
            let mut acc = Neumaier::new();
            for x in 0..n {
                let mut row = Neumaier::new();
                for (y, &vy) in v.iter().enumerate() {
                    row.add(self.re[x * n + y] * vy);
                }
                acc.add(v[x] * row.value());
            }
            out.push(acc.value());
        }
        out
    }

    pub fn min_population(&self) -> f64 {
        (0..self.n).fold(f64::INFINITY, |a, x| a.min(self.re[x * self.n + x]))
    }

    /// Smallest eigenvalue, via the real symmetric embedding.
    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        linalg::hermitian_min_eigenvalue(&self.re, &self.im, self.n)
    }

    pub fn max_abs_difference(&self, other: &DensityMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.re.iter().zip(&other.re) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in self.im.iter().zip(&other.im) {
            worst = worst.max((a - b).abs());
        }
        worst
    }
}

/// Eigenbasis populations at one instant, `time` in units of the inverse
/// tunneling. Entries may dip to `-1e-10` from rounding, never below.
#[derive(Clone, Debug, Serialize)]
pub struct PopulationVector {
    pub populations: Vec<f64>,
    pub time: f64,
}

impl PopulationVector {
    pub fn total(&self) -> f64 {
        crate::dd::sum(&self.populations)
    }

    pub fn min(&self) -> f64 {
        self.populations
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Which propagation engine produced a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    FullLindblad,
    RateEquation,
}

/// Configuration override for engine selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineChoice {
    #[default]
    Auto,
    Full,
    Rate,
}

/// Below this fraction of the tunneling, coherences between eigenstates
/// relax much faster than populations move, and the rate equation is the
/// accurate (and vastly cheaper) description.
pub const DEFAULT_GAMMA_SWITCH_RATIO: f64 = 1e-6;

pub fn select_engine(gamma: f64, tunneling: f64, choice: EngineChoice) -> Engine {
    match choice {
        EngineChoice::Full => Engine::FullLindblad,
        EngineChoice::Rate => Engine::RateEquation,
        EngineChoice::Auto => {
            if gamma < DEFAULT_GAMMA_SWITCH_RATIO * tunneling {
                Engine::RateEquation
            } else {
                Engine::FullLindblad
            }
        }
    }
}

/// First crossing of one decay fraction by the tracked main peak, with the
/// site profile at the crossing. `time: None` means the horizon ended the
/// run first.
#[derive(Clone, Debug, Serialize)]
pub struct DecayRecord {
    pub fraction: f64,
    pub time: Option<f64>,
    pub profile: Option<OccupationProfile>,
}

/// Why an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every sample target and decay fraction was served.
    #[default]
    Completed,
    StepBudget,
    TimeCap,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IntegrationDiagnostics {
    pub steps: usize,
    pub step_size: f64,
    pub step_halvings: usize,
    /// Largest `|tr rho - 1|` seen before any renormalization.
    pub max_trace_drift: f64,
    pub renormalizations: usize,
    pub min_population_seen: f64,
    pub stop: StopReason,
}

/// Time-ordered occupation profiles from one propagation run, with decay
/// crossings and integrator diagnostics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<OccupationProfile>,
    pub gamma: f64,
    pub engine: Engine,
    pub decays: Vec<DecayRecord>,
    pub diagnostics: IntegrationDiagnostics,
    /// Full density matrices stored at requested times (full engine only).
    pub density_snapshots: Vec<(f64, DensityMatrix)>,
}

impl Trajectory {
    /// Wrap externally produced profiles, e.g. in analysis tests.
    pub fn assembled(samples: Vec<OccupationProfile>, gamma: f64, engine: Engine) -> Trajectory {
        Trajectory {
            samples,
            gamma,
            engine,
            decays: Vec::new(),
            diagnostics: IntegrationDiagnostics::default(),
            density_snapshots: Vec::new(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.time).collect()
    }

    /// Stored crossing time for `fraction`, if it was reached.
    pub fn decay_time(&self, fraction: f64) -> Option<f64> {
        self.decays
            .iter()
            .find(|d| d.fraction == fraction)
            .and_then(|d| d.time)
    }
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("not a valid density matrix: {0}")]
    InvalidState(String),
    #[error("positivity violated at t={time}: min site population {value}")]
    PositivityViolation { time: f64, value: f64 },
    #[error("step control exhausted after {halvings} halvings; half-step disagreement {error}")]
    StepHalvingExhausted { halvings: usize, error: f64 },
    #[error("state diverged at t={time}")]
    Diverged { time: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tuning for [`integrate_master`]. Defaults implement the documented
/// contract; tests tighten `step_safety` when they need closed-form
/// accuracy beyond the defaults.
#[derive(Clone, Debug)]
pub struct IntegrationOptions {
    /// `h = step_safety / max(tunneling, gamma_eff)`.
    pub step_safety: f64,
    /// Hard stability ceiling `h <= stability_margin / (gamma f_max)` over
    /// the whole chain; coherences at every distance are reachable even
    /// from a localized start, and fixed-step RK4 must damp each one.
    pub stability_margin: f64,
    /// Sites with initial population at or above this count as occupied
    /// when estimating the effective dephasing rate.
    pub support_floor: f64,
    /// Steps covered by the startup half-step comparison.
    pub richardson_steps: usize,
    /// Allowed trace-norm disagreement between one full step and two half
    /// steps (bounded via `sqrt(n) * frobenius`).
    pub richardson_tol: f64,
    pub max_halvings: usize,
    /// Renormalize when `|tr rho - 1|` exceeds this.
    pub trace_tol: f64,
    /// Error out when any site population falls below this.
    pub positivity_floor: f64,
    pub step_budget: Option<usize>,
    pub time_cap: Option<f64>,
    /// End the run at the final decay-fraction crossing even when later
    /// sample targets remain un-served. This implements the ensemble
    /// horizon "integrate until the main peak has decayed to the deepest
    /// fraction"; ignored when `fractions` is empty.
    pub stop_after_decays: bool,
    /// Site radius when following the main peak between steps.
    pub track_window: usize,
    /// Times at which to store full density matrices.
    pub store_density_at: Vec<f64>,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            step_safety: 0.05,
            stability_margin: 2.5,
            support_floor: 1e-12,
            richardson_steps: 100,
            richardson_tol: 1e-8,
            max_halvings: 8,
            trace_tol: 1e-9,
            positivity_floor: -1e-6,
            step_budget: None,
            time_cap: None,
            stop_after_decays: false,
            track_window: 5,
            store_density_at: Vec::new(),
        }
    }
}

/// Reference right-hand side of the master equation,
/// `drho/dt = -i[H, rho] - gamma f(x,y) rho_{xy}`. The tridiagonal
/// Hamiltonian makes the commutator a five-point stencil, so this is
/// O(N^2). Only the diagonal and upper triangle of the input are read (the
/// stencil above the diagonal never reaches below it, and the diagonal
/// couples to conjugate pairs whose real parts cancel identically); the
/// lower triangle of the output is written by conjugation, so the result
/// is exactly Hermitian with an exactly real diagonal. The production
/// stepper fuses this stencil into its stages; tests hold the two against
/// each other.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &LatticeHamiltonian,
    profile: &DephasingProfile,
    gamma: f64,
) -> DensityMatrix {
    let n = rho.n;
    assert_eq!(h.n_sites(), n, "dimension mismatch");
    let t = h.off_diagonal;
    let mut out = DensityMatrix::zeros(n);
    for x in 0..n {
        // diagonal: d rho_xx / dt = 2t (Im rho_{x-1,x} - Im rho_{x,x+1})
        let i = x * n + x;
        let mut s = 0.0;
        if x > 0 {
            s += rho.im[i - n];
        }
        if x + 1 < n {
            s -= rho.im[i + 1];
        }
        out.re[i] = 2.0 * t * s;
        for y in x + 1..n {
            let i = x * n + y;
            // commutator [H, rho]_{xy}
            let dd = h.diagonal[x] - h.diagonal[y];
            let mut cr = dd * rho.re[i];
            let mut ci = dd * rho.im[i];
            if x > 0 {
                cr += t * rho.re[i - n];
                ci += t * rho.im[i - n];
            }
            cr += t * rho.re[i + n];
            ci += t * rho.im[i + n];
            cr -= t * rho.re[i - 1];
            ci -= t * rho.im[i - 1];
            if y + 1 < n {
                cr -= t * rho.re[i + 1];
                ci -= t * rho.im[i + 1];
            }
            // -i (cr + i ci) - gamma f rho
            let g = gamma * profile.coupling(x, y);
            let re = g.mul_add(-rho.re[i], ci);
            let im = g.mul_add(-rho.im[i], -cr);
            out.re[i] = re;
            out.im[i] = im;
            out.re[y * n + x] = re;
            out.im[y * n + x] = -im;
        }
    }
    out
}

// The stepper works on the upper triangle only (y > x), reading diagonal
// neighbors directly and lower-triangle neighbors through conjugation,
// which keeps Hermiticity exact with no symmetrization pass. Each stage
// fuses three jobs per entry: the stencil evaluation k, the weighted
// accumulation acc += wa*k of the final RK4 combination, and the next
// stage input o = b + c*k (the last stage emits o = b + acc instead).
// The scalar macros below are the single source of arithmetic; the AVX-512
// stage performs the same operations in the same order lane by lane, so
// the two paths agree bit for bit.

macro_rules! offdiag {
    ($n:expr, $d:expr, $t:expr, $gfd:expr, $sre:expr, $sim:expr, $bre:expr, $bim:expr,
     $acc_re:expr, $acc_im:expr, $ore:expr, $oim:expr, $wa:expr, $c:expr,
     $x:expr, $y:expr, $up:expr, $dn:expr, $rt:expr, $init:expr, $last:expr) => {{
        let n = $n;
        let x = $x;
        let y = $y;
        let i = x * n + y;
        unsafe {
            let mut s1r = 0.0;
            let mut s1i = 0.0;
            if $up {
                s1r += *$sre.get_unchecked(i - n);
                s1i += *$sim.get_unchecked(i - n);
            }
            if $dn {
                s1r += *$sre.get_unchecked(i + n);
                s1i += *$sim.get_unchecked(i + n);
            }
            let mut s2r = *$sre.get_unchecked(i - 1);
            let mut s2i = *$sim.get_unchecked(i - 1);
            if $rt {
                s2r += *$sre.get_unchecked(i + 1);
                s2i += *$sim.get_unchecked(i + 1);
            }
            let snr = s1r - s2r;
            let sni = s1i - s2i;
            let dd = *$d.get_unchecked(x) - *$d.get_unchecked(y);
            let rs = *$sre.get_unchecked(i);
            let is_ = *$sim.get_unchecked(i);
            let are = $t.mul_add(snr, dd * rs);
            let aim = $t.mul_add(sni, dd * is_);
            let g = *$gfd.get_unchecked(y - x);
            let kre = g.mul_add(-rs, aim);
            let kim = g.mul_add(-is_, -are);
            let ar;
            let ai;
            if $init {
                ar = $wa * kre;
                ai = $wa * kim;
            } else {
                ar = $wa.mul_add(kre, *$acc_re.get_unchecked(i));
                ai = $wa.mul_add(kim, *$acc_im.get_unchecked(i));
            }
            *$acc_re.get_unchecked_mut(i) = ar;
            *$acc_im.get_unchecked_mut(i) = ai;
            if $last {
                *$ore.get_unchecked_mut(i) = *$bre.get_unchecked(i) + ar;
                *$oim.get_unchecked_mut(i) = *$bim.get_unchecked(i) + ai;
            } else {
                *$ore.get_unchecked_mut(i) = $c.mul_add(kre, *$bre.get_unchecked(i));
                *$oim.get_unchecked_mut(i) = $c.mul_add(kim, *$bim.get_unchecked(i));
            }
        }
    }};
}

// Diagonal body: neighbors below the diagonal are conjugates of stored
// upper-triangle entries, so the real parts cancel in the stencil and the
// imaginary part of the derivative is exactly zero (the im plane of
// diagonal entries is never written and stays 0).
macro_rules! diag {
    ($n:expr, $t:expr, $sre:expr, $sim:expr, $bre:expr,
     $acc_re:expr, $ore:expr, $wa:expr, $c:expr,
     $x:expr, $up:expr, $dn:expr, $init:expr, $last:expr) => {{
        let n = $n;
        let x = $x;
        let i = x * n + x;
        unsafe {
            let mut s1i = 0.0;
            let mut s2i = 0.0;
            if $up {
                let u = *$sim.get_unchecked(i - n);
                s1i += u;
                s2i += -u;
            }
            if $dn {
                let r = *$sim.get_unchecked(i + 1);
                s1i += -r;
                s2i += r;
            }
            let sni = s1i - s2i;
            let _ = $sre; // real parts cancel: up_re = lt_re, dn_re = rt_re
            let kre = $t * sni;
            let ar;
            if $init {
                ar = $wa * kre;
            } else {
                ar = $wa.mul_add(kre, *$acc_re.get_unchecked(i));
            }
            *$acc_re.get_unchecked_mut(i) = ar;
            if $last {
                *$ore.get_unchecked_mut(i) = *$bre.get_unchecked(i) + ar;
            } else {
                *$ore.get_unchecked_mut(i) = $c.mul_add(kre, *$bre.get_unchecked(i));
            }
        }
    }};
}

#[allow(clippy::too_many_arguments)]
fn stage_scalar<const INIT: bool, const LAST: bool>(
    n: usize,
    d: &[f64],
    t: f64,
    gfd: &[f64],
    sre: &[f64],
    sim: &[f64],
    bre: &[f64],
    bim: &[f64],
    acc_re: &mut [f64],
    acc_im: &mut [f64],
    ore: &mut [f64],
    oim: &mut [f64],
    wa: f64,
    c: f64,
) {
    for x in 0..n {
        let up = x > 0;
        let dn = x + 1 < n;
        if up && dn {
            diag!(n, t, sre, sim, bre, acc_re, ore, wa, c, x, true, true, INIT, LAST);
        } else if dn {
            diag!(n, t, sre, sim, bre, acc_re, ore, wa, c, x, false, true, INIT, LAST);
        } else if up {
            diag!(n, t, sre, sim, bre, acc_re, ore, wa, c, x, true, false, INIT, LAST);
        }
        if !dn {
            continue;
        }
        let yend = n - 1;
        let mut y = x + 1;
        if up {
            while y < yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, y,
                    true, true, true, INIT, LAST
                );
                y += 1;
            }
            if y == yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, yend,
                    true, true, false, INIT, LAST
                );
            }
        } else {
            while y < yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, y,
                    false, true, true, INIT, LAST
                );
                y += 1;
            }
            if y == yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, yend,
                    false, true, false, INIT, LAST
                );
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[allow(clippy::too_many_arguments)]
unsafe fn stage_avx512<const INIT: bool, const LAST: bool>(
    n: usize,
    d: &[f64],
    t: f64,
    gfd: &[f64],
    sre: &[f64],
    sim: &[f64],
    bre: &[f64],
    bim: &[f64],
    acc_re: &mut [f64],
    acc_im: &mut [f64],
    ore: &mut [f64],
    oim: &mut [f64],
    wa: f64,
    c: f64,
) {
    use std::arch::x86_64::*;
    let tv = _mm512_set1_pd(t);
    let wav = _mm512_set1_pd(wa);
    let cv = _mm512_set1_pd(c);
    for x in 0..n {
        let up = x > 0;
        let dn = x + 1 < n;
        if up && dn {
            diag!(n, t, sre, sim, bre, acc_re, ore, wa, c, x, true, true, INIT, LAST);
        } else if dn {
            diag!(n, t, sre, sim, bre, acc_re, ore, wa, c, x, false, true, INIT, LAST);
        } else if up {
            diag!(n, t, sre, sim, bre, acc_re, ore, wa, c, x, true, false, INIT, LAST);
        }
        if !dn {
            continue;
        }
        let dxv = _mm512_set1_pd(d[x]);
        let row = x * n;
        let mut y = x + 1;
        let yend = n - 1;
        if up {
            // Interior rows vectorize the whole five-point stencil; the
            // rightmost column stays scalar because its stencil drops the
            // rt neighbor.
            while y + 8 <= yend {
                let i = row + y;
                let up_r = _mm512_loadu_pd(sre.as_ptr().add(i - n));
                let dn_r = _mm512_loadu_pd(sre.as_ptr().add(i + n));
                let lt_r = _mm512_loadu_pd(sre.as_ptr().add(i - 1));
                let rt_r = _mm512_loadu_pd(sre.as_ptr().add(i + 1));
                let ce_r = _mm512_loadu_pd(sre.as_ptr().add(i));
                let up_i = _mm512_loadu_pd(sim.as_ptr().add(i - n));
                let dn_i = _mm512_loadu_pd(sim.as_ptr().add(i + n));
                let lt_i = _mm512_loadu_pd(sim.as_ptr().add(i - 1));
                let rt_i = _mm512_loadu_pd(sim.as_ptr().add(i + 1));
                let ce_i = _mm512_loadu_pd(sim.as_ptr().add(i));
                let snr = _mm512_sub_pd(_mm512_add_pd(up_r, dn_r), _mm512_add_pd(lt_r, rt_r));
                let sni = _mm512_sub_pd(_mm512_add_pd(up_i, dn_i), _mm512_add_pd(lt_i, rt_i));
                let dd = _mm512_sub_pd(dxv, _mm512_loadu_pd(d.as_ptr().add(y)));
                let are = _mm512_fmadd_pd(tv, snr, _mm512_mul_pd(dd, ce_r));
                let aim = _mm512_fmadd_pd(tv, sni, _mm512_mul_pd(dd, ce_i));
                let g = _mm512_loadu_pd(gfd.as_ptr().add(y - x));
                let kre = _mm512_fnmadd_pd(g, ce_r, aim);
                let kim = _mm512_fnmadd_pd(g, ce_i, _mm512_sub_pd(_mm512_setzero_pd(), are));
                let (ar, ai) = if INIT {
                    (_mm512_mul_pd(wav, kre), _mm512_mul_pd(wav, kim))
                } else {
                    (
                        _mm512_fmadd_pd(wav, kre, _mm512_loadu_pd(acc_re.as_ptr().add(i))),
                        _mm512_fmadd_pd(wav, kim, _mm512_loadu_pd(acc_im.as_ptr().add(i))),
                    )
                };
                _mm512_storeu_pd(acc_re.as_mut_ptr().add(i), ar);
                _mm512_storeu_pd(acc_im.as_mut_ptr().add(i), ai);
                if LAST {
                    _mm512_storeu_pd(
                        ore.as_mut_ptr().add(i),
                        _mm512_add_pd(_mm512_loadu_pd(bre.as_ptr().add(i)), ar),
                    );
                    _mm512_storeu_pd(
                        oim.as_mut_ptr().add(i),
                        _mm512_add_pd(_mm512_loadu_pd(bim.as_ptr().add(i)), ai),
                    );
                } else {
                    _mm512_storeu_pd(
                        ore.as_mut_ptr().add(i),
                        _mm512_fmadd_pd(cv, kre, _mm512_loadu_pd(bre.as_ptr().add(i))),
                    );
                    _mm512_storeu_pd(
                        oim.as_mut_ptr().add(i),
                        _mm512_fmadd_pd(cv, kim, _mm512_loadu_pd(bim.as_ptr().add(i))),
                    );
                }
                y += 8;
            }
            while y < yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, y,
                    true, true, true, INIT, LAST
                );
                y += 1;
            }
            if y == yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, yend,
                    true, true, false, INIT, LAST
                );
            }
        } else {
            while y < yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, y,
                    false, true, true, INIT, LAST
                );
                y += 1;
            }
            if y == yend {
                offdiag!(
                    n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c, x, yend,
                    false, true, false, INIT, LAST
                );
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn stage<const INIT: bool, const LAST: bool>(
    use_avx: bool,
    n: usize,
    d: &[f64],
    t: f64,
    gfd: &[f64],
    sre: &[f64],
    sim: &[f64],
    bre: &[f64],
    bim: &[f64],
    acc_re: &mut [f64],
    acc_im: &mut [f64],
    ore: &mut [f64],
    oim: &mut [f64],
    wa: f64,
    c: f64,
) {
    #[cfg(target_arch = "x86_64")]
    if use_avx {
        unsafe {
            stage_avx512::<INIT, LAST>(
                n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c,
            );
        }
        return;
    }
    let _ = use_avx;
    stage_scalar::<INIT, LAST>(n, d, t, gfd, sre, sim, bre, bim, acc_re, acc_im, ore, oim, wa, c);
}

/// One RK4 step from `src` (state and base), leaving the result in `t2`.
/// Stage weights (wa, c): (h/6, h/2), (h/3, h/2), (h/3, h), (h/6, 0).
#[allow(clippy::too_many_arguments)]
fn rk4_step(
    use_avx: bool,
    n: usize,
    d: &[f64],
    t: f64,
    gfd: &[f64],
    src_re: &[f64],
    src_im: &[f64],
    t1re: &mut [f64],
    t1im: &mut [f64],
    t2re: &mut [f64],
    t2im: &mut [f64],
    acc_re: &mut [f64],
    acc_im: &mut [f64],
    h: f64,
) {
    stage::<true, false>(
        use_avx, n, d, t, gfd, src_re, src_im, src_re, src_im, acc_re, acc_im, t1re, t1im,
        h / 6.0, h / 2.0,
    );
    stage::<false, false>(
        use_avx, n, d, t, gfd, t1re, t1im, src_re, src_im, acc_re, acc_im, t2re, t2im, h / 3.0,
        h / 2.0,
    );
    stage::<false, false>(
        use_avx, n, d, t, gfd, t2re, t2im, src_re, src_im, acc_re, acc_im, t1re, t1im, h / 3.0,
        h,
    );
    stage::<false, true>(
        use_avx, n, d, t, gfd, t1re, t1im, src_re, src_im, acc_re, acc_im, t2re, t2im, h / 6.0,
        0.0,
    );
}

/// Eight working planes share cache geometry at large `n` (n*n doubles is
/// near a multiple of the page size), so same-offset loads from different
/// planes would collide in the same cache sets. Staggering each plane by
/// 72 doubles keeps the five-point stencil's streams apart.
fn plane(nn: usize, k: usize) -> (Vec<f64>, usize) {
    (vec![0.0; nn + 72 * 10], 72 * k)
}

fn load_upper(rho: &DensityMatrix, yre: &mut [f64], yim: &mut [f64]) {
    let n = rho.n;
    for x in 0..n {
        yre[x * n + x] = rho.re[x * n + x];
        for y in x + 1..n {
            yre[x * n + y] = rho.re[x * n + y];
            yim[x * n + y] = rho.im[x * n + y];
        }
    }
}

fn mirror_to_density(yre: &[f64], yim: &[f64], n: usize) -> DensityMatrix {
    let mut rho = DensityMatrix::zeros(n);
    for x in 0..n {
        rho.re[x * n + x] = yre[x * n + x];
        for y in x + 1..n {
            let re = yre[x * n + y];
            let im = yim[x * n + y];
            rho.re[x * n + y] = re;
            rho.im[x * n + y] = im;
            rho.re[y * n + x] = re;
            rho.im[y * n + x] = -im;
        }
    }
    rho
}

/// Frobenius norm over the Hermitian extension of stored upper triangles.
fn upper_frobenius_sq(are: &[f64], aim: &[f64], bre: &[f64], bim: &[f64], n: usize) -> f64 {
    let mut acc = Neumaier::new();
    for x in 0..n {
        let d = are[x * n + x] - bre[x * n + x];
        acc.add(d * d);
        for y in x + 1..n {
            let dr = are[x * n + y] - bre[x * n + y];
            let di = aim[x * n + y] - bim[x * n + y];
            acc.add(2.0 * (dr * dr + di * di));
        }
    }
    acc.value()
}

struct DecayTracker {
    main_site: usize,
    initial_height: f64,
    window: usize,
    /// Fractions still awaited, descending, paired with their record slot.
    pending: Vec<(f64, usize)>,
}

impl DecayTracker {
    fn new(p0: &[f64], fractions: &[f64], window: usize) -> (DecayTracker, Vec<DecayRecord>) {
        let mut order: Vec<f64> = fractions.to_vec();
        order.sort_by(|a, b| b.partial_cmp(a).unwrap());
        order.dedup();
        let records: Vec<DecayRecord> = order
            .iter()
            .map(|&fraction| DecayRecord {
                fraction,
                time: None,
                profile: None,
            })
            .collect();
        let pending = order.iter().enumerate().map(|(k, &f)| (f, k)).collect();
        let main_site = argmax(p0);
        (
            DecayTracker {
                main_site,
                initial_height: p0[main_site],
                window,
                pending,
            },
            records,
        )
    }

    /// Follow the main peak one sample forward and record any fraction
    /// crossings inside (t_prev, t_now], interpolating sites linearly.
    fn advance(
        &mut self,
        prev: &[f64],
        cur: &[f64],
        t_prev: f64,
        t_now: f64,
        records: &mut [DecayRecord],
    ) {
        let n = cur.len();
        let lo = self.main_site.saturating_sub(self.window);
        let hi = (self.main_site + self.window + 1).min(n);
        let mut site = lo;
        for x in lo + 1..hi {
            if cur[x] > cur[site] {
                site = x;
            }
        }
        let h_prev = prev[self.main_site];
        self.main_site = site;
        let h_now = cur[site];
        while let Some(&(fraction, slot)) = self.pending.first() {
            let target = fraction * self.initial_height;
            if h_now > target {
                break;
            }
            // Height passed the target inside this interval.
            let span = h_prev - h_now;
            let w = if span > 0.0 && h_prev > target {
                (h_prev - target) / span
            } else {
                1.0
            };
            let t_c = t_prev + w * (t_now - t_prev);
            let populations: Vec<f64> = prev
                .iter()
                .zip(cur)
                .map(|(&a, &b)| a + w * (b - a))
                .collect();
            records[slot].time = Some(t_c);
            records[slot].profile = Some(OccupationProfile {
                populations,
                time: t_c,
            });
            self.pending.remove(0);
        }
    }

    fn done(&self) -> bool {
        self.pending.is_empty()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Integrate the full master equation with fixed-step RK4.
///
/// The step is `h = step_safety / max(T, gamma_eff)` with `gamma_eff` the
/// largest dephasing rate inside the initially occupied support, capped by
/// the global RK4 stability bound. A startup comparison against two half
/// steps guards the first `richardson_steps` steps, halving `h` and
/// restarting from `t = 0` on disagreement (restarts keep the run
/// deterministic for a given final step). Site profiles are sampled at the
/// first step boundary at or past each entry of `targets`; decay-fraction
/// crossings of `fractions` are detected between steps and interpolated
/// linearly.
///
/// A fraction whose target height lies below the uniform steady plateau
/// `1/n` never crosses; bound such runs with `step_budget` or `time_cap`,
/// which stop honestly and leave the record's `time` as `None`.
pub fn integrate_master(
    rho0: &DensityMatrix,
    ham: &LatticeHamiltonian,
    profile: &DephasingProfile,
    gamma: f64,
    targets: &[f64],
    fractions: &[f64],
    opts: &IntegrationOptions,
) -> Result<Trajectory, EvolutionError> {
    let n = rho0.n;
    if n < 2 || ham.n_sites() != n {
        return Err(EvolutionError::InvalidState(format!(
            "need a chain of at least 2 sites with matching dimensions, got rho {} vs H {}",
            n,
            ham.n_sites()
        )));
    }
    if rho0.hermiticity_error() > 1e-12 {
        return Err(EvolutionError::InvalidState(
            "initial state is not Hermitian".into(),
        ));
    }
    if (rho0.trace() - 1.0).abs() > 1e-9 {
        return Err(EvolutionError::InvalidState(format!(
            "initial trace {} is not 1",
            rho0.trace()
        )));
    }
    if gamma < 0.0 {
        return Err(EvolutionError::InvalidState(
            "dephasing rate must be nonnegative".into(),
        ));
    }
    if fractions.iter().any(|&f| !(0.0..1.0).contains(&f) || f == 0.0) {
        return Err(EvolutionError::InvalidState(
            "decay fractions must lie in (0, 1)".into(),
        ));
    }

    // Step size: Hamiltonian scale, dephasing scale on the occupied
    // support, and the stability ceiling for the fastest coherence mode
    // anywhere on the chain.
    let tun = ham.off_diagonal;
    let p0 = rho0.site_populations();
    let occupied: Vec<usize> = (0..n).filter(|&x| p0[x] >= opts.support_floor).collect();
    let width = match (occupied.first(), occupied.last()) {
        (Some(&a), Some(&b)) => b - a,
        _ => n - 1,
    };
    let gamma_eff = gamma * profile.max_within(width);
    let gamma_max = gamma * profile.max_within(n - 1);
    let mut h = opts.step_safety / tun.abs();
    if gamma_eff > 0.0 {
        h = h.min(opts.step_safety / gamma_eff);
    }
    if gamma_max > 0.0 {
        h = h.min(opts.stability_margin / gamma_max);
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(EvolutionError::InvalidState(
            "no dynamics: tunneling and dephasing both vanish".into(),
        ));
    }

    let mut target_times: Vec<f64> = targets.iter().copied().filter(|&t| t > 0.0).collect();
    target_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    target_times.dedup();
    let mut density_times: Vec<f64> = opts.store_density_at.clone();
    density_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    density_times.dedup();

    let nn = n * n;
    let (mut yre_b, o0) = plane(nn, 0);
    let (mut yim_b, o1) = plane(nn, 1);
    let (mut t1re_b, o2) = plane(nn, 2);
    let (mut t1im_b, o3) = plane(nn, 3);
    let (mut t2re_b, o4) = plane(nn, 4);
    let (mut t2im_b, o5) = plane(nn, 5);
    let (mut are_b, o6) = plane(nn, 6);
    let (mut aim_b, o7) = plane(nn, 7);
    // Scratch for the startup check: full-step result and half-step state.
    let mut fre = vec![0.0; nn];
    let mut fim = vec![0.0; nn];
    let mut hre = vec![0.0; nn];
    let mut him = vec![0.0; nn];

    #[cfg(target_arch = "x86_64")]
    let use_avx = std::arch::is_x86_feature_detected!("avx512f");
    #[cfg(not(target_arch = "x86_64"))]
    let use_avx = false;

    let d = &ham.diagonal;
    let gfd: Vec<f64> = (0..n).map(|k| gamma * profile.coupling(0, k)).collect();

    let mut halvings = 0usize;
    'attempt: loop {
        let mut yre: &mut [f64] = &mut yre_b[o0..o0 + nn];
        let mut yim: &mut [f64] = &mut yim_b[o1..o1 + nn];
        let t1re: &mut [f64] = &mut t1re_b[o2..o2 + nn];
        let t1im: &mut [f64] = &mut t1im_b[o3..o3 + nn];
        let mut t2re: &mut [f64] = &mut t2re_b[o4..o4 + nn];
        let mut t2im: &mut [f64] = &mut t2im_b[o5..o5 + nn];
        let are: &mut [f64] = &mut are_b[o6..o6 + nn];
        let aim: &mut [f64] = &mut aim_b[o7..o7 + nn];
        yre.fill(0.0);
        yim.fill(0.0);
        t1re.fill(0.0);
        t1im.fill(0.0);
        t2re.fill(0.0);
        t2im.fill(0.0);
        load_upper(rho0, yre, yim);

        let mut samples = vec![OccupationProfile {
            populations: p0.clone(),
            time: 0.0,
        }];
        let mut density_snapshots: Vec<(f64, DensityMatrix)> = Vec::new();
        let (mut tracker, mut decays) = DecayTracker::new(&p0, fractions, opts.track_window);
        let mut next_target = 0usize;
        let mut next_density = 0usize;
        let mut prev_diag = p0.clone();
        let mut cur_diag = vec![0.0; n];
        let mut diag = IntegrationDiagnostics {
            step_size: h,
            step_halvings: halvings,
            min_population_seen: p0.iter().cloned().fold(f64::INFINITY, f64::min),
            ..IntegrationDiagnostics::default()
        };

        let mut step = 0usize;
        loop {
            let work_left = next_target < target_times.len()
                || next_density < density_times.len()
                || !tracker.done();
            if !work_left {
                diag.stop = StopReason::Completed;
                break;
            }
            if let Some(budget) = opts.step_budget {
                if step >= budget {
                    diag.stop = StopReason::StepBudget;
                    break;
                }
            }
            let t_now = (step as f64 + 1.0) * h;
            if let Some(cap) = opts.time_cap {
                if t_now > cap * (1.0 + 1e-12) {
                    diag.stop = StopReason::TimeCap;
                    break;
                }
            }

            if step < opts.richardson_steps {
                // Full step into t2, kept aside.
                rk4_step(use_avx, n, d, tun, &gfd, yre, yim, t1re, t1im, t2re, t2im, are, aim, h);
                fre.copy_from_slice(t2re);
                fim.copy_from_slice(t2im);
                // Two half steps: the second starts from the first's result.
                rk4_step(
                    use_avx, n, d, tun, &gfd, yre, yim, t1re, t1im, t2re, t2im, are, aim,
                    h / 2.0,
                );
                hre.copy_from_slice(t2re);
                him.copy_from_slice(t2im);
                rk4_step(
                    use_avx, n, d, tun, &gfd, &hre, &him, t1re, t1im, t2re, t2im, are, aim,
                    h / 2.0,
                );
                // ||A||_1 <= sqrt(n) ||A||_F bounds the trace-norm gap.
                let fro_sq = upper_frobenius_sq(&fre, &fim, t2re, t2im, n);
                let bound = (n as f64).sqrt() * fro_sq.sqrt();
                if !bound.is_finite() || bound > opts.richardson_tol {
                    halvings += 1;
                    if halvings > opts.max_halvings {
                        return Err(EvolutionError::StepHalvingExhausted {
                            halvings: halvings - 1,
                            error: bound,
                        });
                    }
                    h /= 2.0;
                    continue 'attempt;
                }
                // Continue with the full-step result: the scheme stays a
                // fixed-step method, the halved pair was only a probe.
                yre.copy_from_slice(&fre);
                yim.copy_from_slice(&fim);
            } else {
                rk4_step(use_avx, n, d, tun, &gfd, yre, yim, t1re, t1im, t2re, t2im, are, aim, h);
                std::mem::swap(&mut yre, &mut t2re);
                std::mem::swap(&mut yim, &mut t2im);
            }
            step += 1;
            diag.steps = step;
            let t_prev = t_now - h;

            for (x, slot) in cur_diag.iter_mut().enumerate() {
                *slot = yre[x * n + x];
            }
            let mut tr = Neumaier::new();
            let mut minp = f64::INFINITY;
            for &pxx in cur_diag.iter() {
                tr.add(pxx);
                minp = minp.min(pxx);
            }
            let trace = tr.value();
            if !trace.is_finite() {
                return Err(EvolutionError::Diverged { time: t_now });
            }
            let drift = (trace - 1.0).abs();
            diag.max_trace_drift = diag.max_trace_drift.max(drift);
            diag.min_population_seen = diag.min_population_seen.min(minp);
            if minp < opts.positivity_floor {
                return Err(EvolutionError::PositivityViolation {
                    time: t_now,
                    value: minp,
                });
            }
            if drift > opts.trace_tol {
                let s = 1.0 / trace;
                for x in 0..n {
                    yre[x * n + x] *= s;
                    for y in x + 1..n {
                        yre[x * n + y] *= s;
                        yim[x * n + y] *= s;
                    }
                }
                for slot in cur_diag.iter_mut() {
                    *slot *= s;
                }
                diag.renormalizations += 1;
            }

            tracker.advance(&prev_diag, &cur_diag, t_prev, t_now, &mut decays);

            if next_target < target_times.len() && target_times[next_target] <= t_now {
                while next_target < target_times.len() && target_times[next_target] <= t_now {
                    next_target += 1;
                }
                samples.push(OccupationProfile {
                    populations: cur_diag.clone(),
                    time: t_now,
                });
            }
            if next_density < density_times.len() && density_times[next_density] <= t_now {
                while next_density < density_times.len() && density_times[next_density] <= t_now {
                    next_density += 1;
                }
                density_snapshots.push((t_now, mirror_to_density(yre, yim, n)));
            }

            if opts.stop_after_decays && !decays.is_empty() && tracker.done() {
                diag.stop = StopReason::Completed;
                break;
            }

            std::mem::swap(&mut prev_diag, &mut cur_diag);
        }

        return Ok(Trajectory {
            samples,
            gamma,
            engine: Engine::FullLindblad,
            decays,
            diagnostics: diag,
            density_snapshots,
        });
    }
}

/// Eigendecomposition of a coupling matrix, reused for every rate and
/// time: `p(t) = V exp(-gamma Lambda t) V^T p0`.
#[derive(Clone, Debug)]
pub struct RatePropagator {
    /// Row `k` is the k-th eigenvector of `eta`.
    vectors: Vec<f64>,
    /// Ascending eigenvalues, clamped at zero: `eta` is positive
    /// semidefinite, so negative values are certified rounding debris.
    rates: Vec<f64>,
    n: usize,
}

impl RatePropagator {
    pub fn new(eta: &RateMatrix) -> Result<RatePropagator, LinalgError> {
        let eig = linalg::eigh_dense(&eta.eta, eta.n)?;
        let rates = eig.values.iter().map(|&v| v.max(0.0)).collect();
        Ok(RatePropagator {
            vectors: eig.vectors,
            rates,
            n: eta.n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Populations at time `t` from `p0`, clamped at -1e-10.
    pub fn evolve(&self, p0: &[f64], gamma: f64, t: f64) -> Vec<f64> {
        let n = self.n;
        assert_eq!(p0.len(), n, "population length mismatch");
        let gt = gamma * t;
        let mut out = vec![0.0; n];
        let mut acc: Vec<Neumaier> = (0..n).map(|_| Neumaier::new()).collect();
        for k in 0..n {
            let v = &self.vectors[k * n..(k + 1) * n];
            let mut m = Neumaier::new();
            for (x, &p) in p0.iter().enumerate() {
                m.add(v[x] * p);
            }
            let amp = m.value() * (-self.rates[k] * gt).exp();
            for (x, a) in acc.iter_mut().enumerate() {
                a.add(v[x] * amp);
            }
        }
        for (x, a) in acc.iter().enumerate() {
            out[x] = a.value().max(-1e-10);
        }
        out
    }
}

/// One-shot rate-equation evaluation. Diagonalizes `eta` on every call;
/// hold a [`RatePropagator`] to reuse the decomposition across times.
pub fn rate_matrix_propagator(
    p0: &PopulationVector,
    eta: &RateMatrix,
    gamma: f64,
    t: f64,
) -> Result<PopulationVector, LinalgError> {
    let prop = RatePropagator::new(eta)?;
    Ok(PopulationVector {
        populations: prop.evolve(&p0.populations, gamma, t),
        time: p0.time + t,
    })
}

/// `P(x) = sum_i p_i |psi_i(x)|^2`.
pub fn site_populations(p: &PopulationVector, spec: &SpectralDecomposition) -> OccupationProfile {
    OccupationProfile {
        populations: site_profile(&p.populations, spec),
        time: p.time,
    }
}

fn site_profile(p: &[f64], spec: &SpectralDecomposition) -> Vec<f64> {
    let n = spec.n;
    assert_eq!(p.len(), n, "population length mismatch");
    let mut acc: Vec<Neumaier> = (0..n).map(|_| Neumaier::new()).collect();
    for (i, &pi) in p.iter().enumerate() {
        let v = spec.eigenvector(i);
        for (x, a) in acc.iter_mut().enumerate() {
            a.add(pi * v[x] * v[x]);
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// First time the tracked main peak of the site profile decays to
/// `fraction` of its initial height, by doubling walk from far below the
/// horizon followed by bisection to relative tolerance 1e-3. `None` when
/// the horizon arrives first. Each trial evaluation is exact, so the cost
/// is a few dozen O(N^2) profile evaluations.
pub fn rate_decay_time(
    prop: &RatePropagator,
    spec: &SpectralDecomposition,
    p0: &[f64],
    gamma: f64,
    fraction: f64,
    horizon: f64,
    window: usize,
) -> Option<f64> {
    let profile0 = site_profile(p0, spec);
    let site0 = argmax(&profile0);
    let target = fraction * profile0[site0];

    let height_at = |t: f64, hint: usize| -> (f64, usize) {
        let p = prop.evolve(p0, gamma, t);
        let prof = site_profile(&p, spec);
        let n = prof.len();
        let lo = hint.saturating_sub(window);
        let hi = (hint + window + 1).min(n);
        let mut site = lo;
        for x in lo + 1..hi {
            if prof[x] > prof[site] {
                site = x;
            }
        }
        (prof[site], site)
    };

    // Doubling walk up to the horizon; 60 octaves cover any sensible span.
    let mut t_lo = 0.0;
    let mut site = site0;
    let mut bracket = None;
    for k in 0..=60 {
        let t = horizon * (2.0f64).powi(k - 60);
        let (height, s) = height_at(t, site);
        if height <= target {
            bracket = Some((t_lo, t));
            break;
        }
        site = s;
        t_lo = t;
    }
    let (mut lo, mut hi) = bracket?;
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        let (height, s) = height_at(mid, site);
        if height > target {
            lo = mid;
            site = s;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Slow-dephasing trajectory: exact rate-equation profiles at `targets`,
/// and decay records for each entry of `fractions` located by
/// [`rate_decay_time`] under the `horizon` cap.
#[allow(clippy::too_many_arguments)]
pub fn rate_trajectory(
    prop: &RatePropagator,
    spec: &SpectralDecomposition,
    p0: &[f64],
    gamma: f64,
    targets: &[f64],
    fractions: &[f64],
    horizon: f64,
    window: usize,
) -> Trajectory {
    let mut times: Vec<f64> = targets.iter().copied().filter(|&t| t > 0.0).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();

    let mut samples = vec![site_populations(
        &PopulationVector {
            populations: p0.to_vec(),
            time: 0.0,
        },
        spec,
    )];
    for &t in &times {
        let p = prop.evolve(p0, gamma, t);
        samples.push(OccupationProfile {
            populations: site_profile(&p, spec),
            time: t,
        });
    }

    let mut order: Vec<f64> = fractions.to_vec();
    order.sort_by(|a, b| b.partial_cmp(a).unwrap());
    order.dedup();
    let decays: Vec<DecayRecord> = order
        .iter()
        .map(|&fraction| {
            let time = rate_decay_time(prop, spec, p0, gamma, fraction, horizon, window);
            let profile = time.map(|t| {
                let p = prop.evolve(p0, gamma, t);
                OccupationProfile {
                    populations: site_profile(&p, spec),
                    time: t,
                }
            });
            DecayRecord {
                fraction,
                time,
                profile,
            }
        })
        .collect();

    Trajectory {
        samples,
        gamma,
        engine: Engine::RateEquation,
        decays,
        diagnostics: IntegrationDiagnostics::default(),
        density_snapshots: Vec::new(),
    }
}
