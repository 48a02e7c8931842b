//! The memory protocol: heralding, superposition preparation and readout,
//! cross-correlation statistics and thermometry.

use std::f64::consts::{FRAC_PI_4, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{thermal_occupation, OccupationProfile};
use crate::error::{ensure, invalid, Error, Result};
use crate::fock::{
    annihilation, build_state, DensityMatrix, Detector, FockSpace, LeakagePolicy, ModePrep,
    TwoModeGate, DEFAULT_DIM,
};

/// Cauchy-Schwarz bound on the photon-phonon cross-correlation.
pub const CLASSICAL_BOUND: f64 = 2.0;
/// Cross-correlation needed to violate a Bell inequality.
pub const BELL_BOUND: f64 = 5.7;
/// Setup interference ceiling used by default in the readout.
pub const DEFAULT_SETUP_VISIBILITY: f64 = 0.95;
const MIN_HERALD_PROBABILITY: f64 = 1e-12;
/// Extra levels per mode in the readout interferometer.
const READOUT_PADDING: usize = 6;

pub fn classical_bound() -> f64 {
    CLASSICAL_BOUND
}

pub fn bell_bound() -> f64 {
    BELL_BOUND
}

/// Optomechanical constants. Frequencies are ordinary (`/2 pi`) in Hz,
/// `gamma_m` is an energy decay rate in 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    pub omega_m: f64,
    pub kappa_i: f64,
    pub kappa_e: f64,
    pub g0: f64,
    pub gamma_m: f64,
    pub p_b: f64,
    pub p_r: f64,
}

impl DeviceParams {
    pub const REFERENCE: DeviceParams = DeviceParams {
        omega_m: 5.12e9,
        kappa_i: 460e6,
        kappa_e: 1840e6,
        g0: 780e3,
        gamma_m: 1.0 / 1.8e-3,
        p_b: 0.002,
        p_r: 0.14,
    };

    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_e
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_m", self.omega_m),
            ("kappa_i", self.kappa_i),
            ("kappa_e", self.kappa_e),
            ("g0", self.g0),
            ("gamma_m", self.gamma_m),
        ] {
            ensure(
                v.is_finite() && v > 0.0,
                name,
                format!("{v} must be a positive rate"),
            )?;
        }
        for (name, v) in [("p_b", self.p_b), ("p_r", self.p_r)] {
            ensure(
                (0.0..1.0).contains(&v),
                name,
                format!("{v} must lie in [0, 1)"),
            )?;
        }
        Ok(())
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

fn check_herald_inputs(p_b: f64, n_init: f64, dim: usize) -> Result<()> {
    ensure(
        p_b > 0.0 && p_b < 1.0,
        "p_b",
        format!("{p_b} must lie in (0, 1)"),
    )?;
    ensure(
        n_init.is_finite() && n_init >= 0.0,
        "n_init",
        format!("{n_init} must be >= 0"),
    )?;
    ensure(dim >= 2, "dim", "cutoff must be at least 2")
}

/// Mechanical state after a Stokes photon herald, from a thermal mechanical
/// mode with occupation `n_init`.
pub fn heralded_phonon_state(p_b: f64, n_init: f64, dim: usize) -> Result<DensityMatrix> {
    heralded_phonon_state_with(p_b, n_init, dim, Detector::Fock(1))
}

pub fn heralded_phonon_state_with(
    p_b: f64,
    n_init: f64,
    dim: usize,
    detector: Detector,
) -> Result<DensityMatrix> {
    check_herald_inputs(p_b, n_init, dim)?;
    let space = FockSpace::uniform(2, dim)?;
    let rho = build_state(&space, &[ModePrep::Vacuum, ModePrep::Thermal(n_init)])?;
    let rho = rho.apply_gate(
        TwoModeGate::Squeeze { p_b, phase: 0.0 },
        (0, 1),
        LeakagePolicy::default(),
    )?;
    let (post, probability) = rho.project(0, detector)?;
    if probability < MIN_HERALD_PROBABILITY {
        return Err(Error::ZeroProbability);
    }
    post.partial_trace(&[1])
}

/// Mean photon number of the Stokes field scattered by the squeezer.
pub fn stokes_mean_photons(p_b: f64, n_init: f64, dim: usize) -> Result<f64> {
    check_herald_inputs(p_b, n_init, dim)?;
    let space = FockSpace::uniform(2, dim)?;
    let rho = build_state(&space, &[ModePrep::Vacuum, ModePrep::Thermal(n_init)])?;
    let rho = rho.apply_gate(
        TwoModeGate::Squeeze { p_b, phase: 0.0 },
        (0, 1),
        LeakagePolicy::default(),
    )?;
    Ok(rho.mode_stats(0)?.mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeraldConfig {
    pub p_b: f64,
    pub n_init: f64,
    /// Magnitude of the first weak coherent state.
    pub wcs_alpha: f64,
    /// Interferometer phase of the weak coherent state.
    pub wcs_phase: f64,
    pub dim: usize,
    /// Beamsplitter angle between the Stokes and WCS modes.
    pub mixing_angle: f64,
    #[serde(skip)]
    pub detector: Detector,
}

impl Default for HeraldConfig {
    fn default() -> Self {
        Self {
            p_b: DeviceParams::REFERENCE.p_b,
            n_init: 0.0,
            wcs_alpha: 0.0,
            wcs_phase: 0.0,
            dim: DEFAULT_DIM,
            mixing_angle: FRAC_PI_4,
            detector: Detector::Fock(1),
        }
    }
}

impl HeraldConfig {
    /// Sets the WCS amplitude from a count-rate ratio `C_WCS / C_b`, using
    /// `|alpha|^2 = ratio * <n_Stokes>`.
    pub fn with_ratio(mut self, ratio: f64) -> Result<Self> {
        ensure(
            ratio.is_finite() && ratio >= 0.0,
            "ratio",
            format!("{ratio} must be >= 0"),
        )?;
        let n_stokes = stokes_mean_photons(self.p_b, self.n_init, self.dim)?;
        self.wcs_alpha = (ratio * n_stokes).sqrt();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_herald_inputs(self.p_b, self.n_init, self.dim)?;
        ensure(
            self.wcs_alpha.is_finite() && self.wcs_alpha >= 0.0 && self.wcs_alpha < 1.0,
            "wcs_alpha",
            format!("{} must lie in [0, 1)", self.wcs_alpha),
        )?;
        ensure(self.wcs_phase.is_finite(), "wcs_phase", "must be finite")?;
        ensure(
            self.mixing_angle.is_finite(),
            "mixing_angle",
            "must be finite",
        )
    }

    pub fn alpha(&self) -> C64 {
        C64::from_polar(self.wcs_alpha, self.wcs_phase)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Superposition {
    /// Mechanical state.
    pub state: DensityMatrix,
    pub herald_probability: f64,
    /// `<1|rho_m|1>`.
    pub single_phonon_weight: f64,
}

/// Heralds the mechanical mode on a Stokes photon that has been mixed with a
/// weak coherent state, preparing a vacuum/one-phonon superposition.
pub fn prepare_superposition(cfg: &HeraldConfig) -> Result<Superposition> {
    cfg.validate()?;
    // modes: 0 Stokes, 1 mechanics, 2 WCS
    let space = FockSpace::uniform(3, cfg.dim)?;
    let rho = build_state(
        &space,
        &[
            ModePrep::Vacuum,
            ModePrep::Thermal(cfg.n_init),
            ModePrep::Coherent(cfg.alpha()),
        ],
    )?;
    let rho = rho.apply_gate(
        TwoModeGate::Squeeze {
            p_b: cfg.p_b,
            phase: 0.0,
        },
        (0, 1),
        LeakagePolicy::default(),
    )?;
    let rho = rho.apply_gate(
        TwoModeGate::BeamSplitter {
            angle: cfg.mixing_angle,
            phase: 0.0,
        },
        (0, 2),
        LeakagePolicy::default(),
    )?;
    let (post, herald_probability) = rho.project(0, cfg.detector)?;
    if herald_probability < MIN_HERALD_PROBABILITY {
        return Err(Error::ZeroProbability);
    }
    let state = post.partial_trace(&[1])?;
    let single_phonon_weight = state.population(&[1])?;
    Ok(Superposition {
        state,
        herald_probability,
        single_phonon_weight,
    })
}

/// `(1 - n) / n`: the count-rate ratio giving weight `n` without thermal
/// background.
pub fn wcs_ratio_for_target(n_target: f64) -> Result<f64> {
    ensure(
        n_target > 0.0 && n_target < 1.0,
        "n_target",
        format!("{n_target} must lie in (0, 1)"),
    )?;
    Ok((1.0 - n_target) / n_target)
}

/// Count-rate ratio producing single-phonon weight `n_target` for the given
/// background, by bisection on the full calculation.
pub fn ratio_for_weight(base: &HeraldConfig, n_target: f64) -> Result<f64> {
    let weight = |ratio: f64| -> Result<f64> {
        Ok(prepare_superposition(&base.with_ratio(ratio)?)?.single_phonon_weight)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let top = weight(lo)?;
    ensure(
        n_target < top,
        "n_target",
        format!("{n_target} not below the heralded weight {top:.4}"),
    )?;
    while weight(hi)? > n_target {
        hi *= 2.0;
        ensure(
            hi < 1e4,
            "n_target",
            "unreachable with a weak coherent state",
        )?;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if weight(mid)? > n_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Interferometer for [`readout_visibility`]: the stored mode and a
/// coherent reference mixed 50:50, with the photon number of one output.
#[derive(Clone, Debug)]
pub struct Readout {
    dim: usize,
    observable: DMatrix<C64>,
}

impl Readout {
    pub fn new(state_dim: usize) -> Result<Self> {
        ensure(state_dim >= 2, "dim", "cutoff must be at least 2")?;
        let dim = state_dim + READOUT_PADDING;
        let u = TwoModeGate::BeamSplitter {
            angle: FRAC_PI_4,
            phase: 0.0,
        }
        .unitary(dim, dim);
        let a = annihilation(dim);
        let n0 = (a.adjoint() * &a).kronecker(&DMatrix::identity(dim, dim));
        let observable = u.adjoint() * n0 * &u;
        Ok(Self { dim, observable })
    }

    /// Mean output photon number for each reference phase.
    pub fn curve(&self, rho_m: &DensityMatrix, beta: C64, phases: &[f64]) -> Result<Vec<f64>> {
        if rho_m.space().mode_count() != 1 || rho_m.space().dims()[0] + READOUT_PADDING != self.dim
        {
            return Err(Error::DimensionMismatch(
                "readout expects a single-mode state of the configured cutoff".into(),
            ));
        }
        let d = rho_m.space().dims()[0];
        let mut embedded = DMatrix::<C64>::zeros(self.dim, self.dim);
        embedded.view_mut((0, 0), (d, d)).copy_from(rho_m.matrix());
        let mut out = Vec::with_capacity(phases.len());
        for &phi in phases {
            let sigma = ModePrep::Coherent(beta * C64::from_polar(1.0, phi)).matrix(self.dim)?;
            let joint = embedded.kronecker(&sigma);
            // Tr(M X) without forming the product
            let value: C64 = self
                .observable
                .transpose()
                .iter()
                .zip(joint.iter())
                .map(|(m, x)| m * x)
                .sum();
            out.push(value.re);
        }
        Ok(out)
    }
}

/// Interference visibility of `rho_m` against a swept coherent reference,
/// scaled by the setup ceiling.
pub fn readout_visibility(
    rho_m: &DensityMatrix,
    beta: C64,
    setup_visibility: f64,
    phase_steps: usize,
) -> Result<f64> {
    ensure(
        phase_steps >= 8,
        "phase_steps",
        format!("{phase_steps} is below 8"),
    )?;
    ensure(
        setup_visibility > 0.0 && setup_visibility <= 1.0,
        "setup_visibility",
        format!("{setup_visibility} must lie in (0, 1]"),
    )?;
    if beta.norm() == 0.0 || !beta.norm().is_finite() {
        return Err(invalid(
            "beta",
            "visibility is undefined without a reference",
        ));
    }
    let readout = Readout::new(rho_m.space().dims()[0])?;
    let phases: Vec<f64> = (0..phase_steps)
        .map(|k| TAU * k as f64 / phase_steps as f64)
        .collect();
    let curve = readout.curve(rho_m, beta, &phases)?;
    Ok(fringe_visibility(&curve, &phases) * setup_visibility)
}

/// `(max - min) / (max + min)` of the first-harmonic fringe through
/// uniformly spaced samples.
pub fn fringe_visibility(curve: &[f64], phases: &[f64]) -> f64 {
    let n = curve.len() as f64;
    let mean = curve.iter().sum::<f64>() / n;
    let h: C64 = curve
        .iter()
        .zip(phases)
        .map(|(v, p)| C64::from_polar(*v, -p))
        .sum::<C64>()
        * (2.0 / n);
    if mean <= 0.0 {
        return 0.0;
    }
    h.norm() / mean
}

/// `1 + exp(-gamma_m dt) / n_therm(dt)`.
pub fn g2_om_model(
    delta_tau: f64,
    gamma_m: f64,
    n_therm: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    ensure(
        delta_tau.is_finite() && delta_tau >= 0.0,
        "delta_tau",
        "must be >= 0",
    )?;
    let n = n_therm(delta_tau)?;
    ensure(n > 0.0, "n_therm", format!("{n} must be positive"))?;
    Ok(1.0 + (-gamma_m * delta_tau).exp() / n)
}

/// First delay at which the cross-correlation model drops to `threshold`,
/// from a log-spaced scan refined by bisection.
pub fn g2_crossing(
    threshold: f64,
    gamma_m: f64,
    profile: &OccupationProfile,
    t_min: f64,
    t_max: f64,
) -> Result<Option<f64>> {
    ensure(
        t_min > 0.0 && t_max > t_min,
        "scan range",
        "need 0 < t_min < t_max",
    )?;
    let g = |t: f64| g2_om_model(t, gamma_m, |d| thermal_occupation(profile, d));
    if g(t_min)? <= threshold {
        return Ok(Some(t_min));
    }
    let steps = 2000;
    let ratio = (t_max / t_min).powf(1.0 / steps as f64);
    let mut lo = t_min;
    for i in 1..=steps {
        let hi = t_min * ratio.powi(i);
        if g(hi)? <= threshold {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if g(m)? > threshold {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        lo = hi;
    }
    Ok(None)
}

/// Pulsed-trial counts: Stokes singles, anti-Stokes singles and joint
/// detections.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationRecord {
    pub n_trials: u64,
    pub n_b: u64,
    pub n_r: u64,
    pub n_coinc: u64,
}

impl CorrelationRecord {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.n_coinc <= self.n_b.min(self.n_r),
            "coincidences",
            "exceed a singles count",
        )?;
        ensure(
            self.n_b <= self.n_trials && self.n_r <= self.n_trials,
            "singles",
            "exceed the trial count",
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct G2Estimate {
    pub g2: f64,
    /// Poisson standard deviation; `None` without coincidences.
    pub sd: Option<f64>,
}

pub fn g2_from_counts(rec: &CorrelationRecord) -> Result<G2Estimate> {
    rec.validate()?;
    ensure(rec.n_b > 0 && rec.n_r > 0, "singles", "cannot be zero")?;
    let (t, b, r, c) = (
        rec.n_trials as f64,
        rec.n_b as f64,
        rec.n_r as f64,
        rec.n_coinc as f64,
    );
    let g2 = c * t / (b * r);
    let sd = (rec.n_coinc > 0).then(|| g2 * (1.0 / c + 1.0 / b + 1.0 / r).sqrt());
    Ok(G2Estimate { g2, sd })
}

/// `(g_sym - g_asy) / (g_sym + g_asy)`.
pub fn correlation_coefficient(g_sym: f64, g_asy: f64) -> Result<f64> {
    ensure(
        g_sym >= 0.0 && g_asy >= 0.0,
        "correlations",
        "must be nonnegative",
    )?;
    ensure(g_sym + g_asy > 0.0, "correlations", "both are zero")?;
    Ok((g_sym - g_asy) / (g_sym + g_asy))
}

/// Mode occupation from the anti-Stokes to Stokes rate asymmetry at equal
/// drive energies.
pub fn sideband_asymmetry_occupancy(rate_stokes: f64, rate_antistokes: f64) -> Result<f64> {
    ensure(rate_antistokes >= 0.0, "rate_antistokes", "must be >= 0")?;
    ensure(
        rate_stokes > rate_antistokes,
        "rates",
        format!("Stokes rate {rate_stokes} must exceed anti-Stokes rate {rate_antistokes}"),
    )?;
    Ok(rate_antistokes / (rate_stokes - rate_antistokes))
}

/// Pulsed pair-generation and readout trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulsedTrials {
    pub p_b: f64,
    pub p_r: f64,
    pub n_therm: f64,
    pub efficiency_b: f64,
    pub efficiency_r: f64,
    pub n_trials: u64,
    pub seed: u64,
}

fn geometric(rng: &mut ChaCha8Rng, q: f64) -> u64 {
    // P(k) = (1 - q) q^k
    if q <= 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    ((1.0 - u).ln() / q.ln()).floor() as u64
}

fn binomial_any(rng: &mut ChaCha8Rng, k: u64, p: f64) -> bool {
    (0..k).any(|_| rng.random::<f64>() < p)
}

/// Monte Carlo trials: the squeezer emits `k` pairs with
/// `P(k) = (1 - p_b) p_b^k`, the mechanics adds a thermal population, and
/// each quantum is detected independently.
pub fn simulate_pulsed_trials(cfg: &PulsedTrials) -> Result<CorrelationRecord> {
    ensure(cfg.p_b > 0.0 && cfg.p_b < 1.0, "p_b", "must lie in (0, 1)")?;
    ensure(cfg.p_r > 0.0 && cfg.p_r <= 1.0, "p_r", "must lie in (0, 1]")?;
    ensure(cfg.n_therm >= 0.0, "n_therm", "must be >= 0")?;
    for (name, e) in [
        ("efficiency_b", cfg.efficiency_b),
        ("efficiency_r", cfg.efficiency_r),
    ] {
        ensure(e > 0.0 && e <= 1.0, name, "must lie in (0, 1]")?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q_th = cfg.n_therm / (1.0 + cfg.n_therm);
    let mut rec = CorrelationRecord {
        n_trials: cfg.n_trials,
        ..Default::default()
    };
    for _ in 0..cfg.n_trials {
        let pairs = geometric(&mut rng, cfg.p_b);
        let phonons = pairs + geometric(&mut rng, q_th);
        let b = binomial_any(&mut rng, pairs, cfg.efficiency_b);
        let r = binomial_any(&mut rng, phonons, cfg.p_r * cfg.efficiency_r);
        rec.n_b += u64::from(b);
        rec.n_r += u64::from(r);
        rec.n_coinc += u64::from(b && r);
    }
    Ok(rec)
}
