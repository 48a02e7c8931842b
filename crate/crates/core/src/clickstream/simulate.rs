use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Ratio between a Gaussian FWHM and its standard deviation.
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
/// Initial thinning bound as a multiple of the mean rate.
const BOUND_FACTOR: f64 = 8.0;

/// One detector line: efficiency share of the signal plus flat backgrounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorLine {
    pub efficiency: f64,
    /// Dark counts, Hz.
    pub dark_rate: f64,
    /// Drive photons leaking through the filters, Hz.
    #[serde(default)]
    pub leakage_rate: f64,
}

impl DetectorLine {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            leakage_rate: 0.0,
        }
    }

    /// Leakage count rate for a drive photon flux (1/s) attenuated by
    /// `suppression_db` and detected with this line's efficiency.
    pub fn leakage_from_suppression(&self, drive_photon_flux: f64, suppression_db: f64) -> f64 {
        drive_photon_flux * 10f64.powf(-suppression_db / 10.0) * self.efficiency
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.efficiency > 0.0 && self.efficiency <= 1.0,
            "efficiency",
            format!("{} must lie in (0, 1]", self.efficiency),
        )?;
        ensure(
            self.dark_rate >= 0.0 && self.dark_rate.is_finite(),
            "dark_rate",
            "must be finite and >= 0",
        )?;
        ensure(
            self.leakage_rate >= 0.0 && self.leakage_rate.is_finite(),
            "leakage_rate",
            "must be finite and >= 0",
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionChain {
    pub lines: Vec<DetectorLine>,
}

impl DetectionChain {
    pub fn ideal(lines: usize) -> Self {
        Self {
            lines: vec![DetectorLine::ideal(); lines],
        }
    }

    /// Two lines with the quoted setup-1 efficiency and detector-1 dark rate.
    pub fn reference() -> Self {
        let line = DetectorLine {
            efficiency: 0.34,
            dark_rate: 20.0,
            leakage_rate: 0.0,
        };
        Self {
            lines: vec![line; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::EmptyInput("detection chain has no lines"));
        }
        self.lines.iter().try_for_each(DetectorLine::validate)
    }

    pub fn background_rate(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| l.dark_rate + l.leakage_rate)
            .sum()
    }
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CwMode {
    /// Mechanical sideband beating with an electro-optic probe.
    Interference,
    /// Mechanical sideband alone.
    Bunching,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sideband {
    Red,
    Blue,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwScenario {
    pub mode: CwMode,
    /// Intracavity photons of the drive; recorded for bookkeeping.
    pub n_c: f64,
    /// Drive sideband; the beat note is insensitive to its sign.
    pub detuning_sign: Sideband,
    /// Probe detuning from the mechanical sideband, Hz.
    pub delta_omega: f64,
    /// Field correlation time of the sideband, s. Infinite gives a constant
    /// amplitude.
    pub coherence_tau: f64,
    /// Stationary FWHM of the mechanical frequency jitter, Hz; 0 disables it.
    pub jitter_fwhm: f64,
    /// Correlation time of the frequency jitter, s.
    pub jitter_corr_time: f64,
    /// Probe intensity relative to the mean sideband intensity.
    pub probe_ratio: f64,
    /// Mean detected signal rate over all lines, Hz.
    pub target_count_rate: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for CwScenario {
    fn default() -> Self {
        Self {
            mode: CwMode::Interference,
            n_c: 0.75,
            detuning_sign: Sideband::Red,
            delta_omega: 100e3,
            coherence_tau: 16e-6,
            jitter_fwhm: 0.0,
            jitter_corr_time: 1e-3,
            probe_ratio: 1.0,
            target_count_rate: 500.0,
            duration: 8000.0,
            seed: 0,
        }
    }
}

impl CwScenario {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.duration > 0.0 && self.duration.is_finite(),
            "duration",
            "must be positive",
        )?;
        ensure(
            self.target_count_rate > 0.0 && self.target_count_rate.is_finite(),
            "target_count_rate",
            "must be positive",
        )?;
        ensure(
            self.coherence_tau > 0.0,
            "coherence_tau",
            "must be positive",
        )?;
        ensure(
            self.jitter_fwhm >= 0.0 && self.jitter_fwhm.is_finite(),
            "jitter_fwhm",
            "must be >= 0",
        )?;
        ensure(
            self.jitter_corr_time > 0.0 && self.jitter_corr_time.is_finite(),
            "jitter_corr_time",
            "must be positive",
        )?;
        ensure(
            self.delta_omega.is_finite(),
            "delta_omega",
            "must be finite",
        )?;
        ensure(
            self.probe_ratio >= 0.0 && self.probe_ratio.is_finite(),
            "probe_ratio",
            "must be >= 0",
        )?;
        ensure(self.n_c >= 0.0, "n_c", "must be >= 0")
    }

    /// Mean of `|a_m + a_probe|^2` with `E|a_m|^2 = 1`.
    fn mean_intensity(&self) -> f64 {
        match self.mode {
            CwMode::Interference => 1.0 + self.probe_ratio,
            CwMode::Bunching => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub detector_id: u32,
    pub timestamp: f64,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Stationary complex Ornstein-Uhlenbeck amplitude with `E|a|^2 = 1`,
/// advanced exactly between arbitrary times.
#[derive(Clone, Debug)]
pub struct OuAmplitude {
    tau: f64,
    value: C64,
}

impl OuAmplitude {
    pub fn new(tau: f64, rng: &mut ChaCha8Rng) -> Self {
        let value = if tau.is_infinite() {
            C64::new(1.0, 0.0)
        } else {
            C64::new(normal(rng), normal(rng)) * std::f64::consts::FRAC_1_SQRT_2
        };
        Self { tau, value }
    }

    pub fn value(&self) -> C64 {
        self.value
    }

    pub fn advance(&mut self, dt: f64, rng: &mut ChaCha8Rng) {
        if self.tau.is_infinite() || dt == 0.0 {
            return;
        }
        let rho = (-dt / self.tau).exp();
        let s = ((1.0 - rho * rho) * 0.5).sqrt();
        self.value = self.value * rho + C64::new(normal(rng), normal(rng)) * s;
    }
}

/// Ornstein-Uhlenbeck angular frequency offset and its integral (the
/// accumulated phase), advanced exactly as a joint Gaussian.
#[derive(Clone, Debug)]
pub struct OuPhase {
    sigma: f64,
    tau: f64,
    omega: f64,
    phase: f64,
}

impl OuPhase {
    /// `fwhm` is the stationary FWHM of the frequency (Hz).
    pub fn new(fwhm: f64, tau: f64, rng: &mut ChaCha8Rng) -> Self {
        let sigma = TAU * fwhm / FWHM_PER_SIGMA;
        Self {
            sigma,
            tau,
            omega: sigma * normal(rng),
            phase: 0.0,
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn advance(&mut self, dt: f64, rng: &mut ChaCha8Rng) {
        if self.sigma == 0.0 || dt == 0.0 {
            return;
        }
        let x = dt / self.tau;
        let rho = (-x).exp();
        let var_w = self.sigma * self.sigma * (1.0 - rho * rho);
        let shape = if x < 1e-3 {
            (2.0 / 3.0) * x.powi(3) - 0.5 * x.powi(4) + (7.0 / 30.0) * x.powi(5)
        } else {
            2.0 * x - 3.0 + 4.0 * rho - rho * rho
        };
        let var_y = self.sigma * self.sigma * self.tau * self.tau * shape;
        let cov = self.sigma * self.sigma * self.tau * (1.0 - rho).powi(2);
        let (z1, z2) = (normal(rng), normal(rng));
        let sw = var_w.sqrt();
        let c = if sw > 0.0 { cov / sw } else { 0.0 };
        let d = (var_y - c * c).max(0.0).sqrt();
        self.phase += self.tau * (1.0 - rho) * self.omega + c * z1 + d * z2;
        self.omega = rho * self.omega + sw * z1;
    }
}

/// Monte Carlo detector clicks for a continuous-wave measurement, merged
/// over all lines in time order.
pub fn simulate_clicks(scn: &CwScenario, chain: &DetectionChain) -> Result<Vec<ClickRecord>> {
    scn.validate()?;
    chain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let total_eff: f64 = chain.lines.iter().map(|l| l.efficiency).sum();
    let shares: Vec<f64> = chain
        .lines
        .iter()
        .map(|l| l.efficiency / total_eff)
        .collect();
    let flat: Vec<f64> = chain
        .lines
        .iter()
        .map(|l| l.dark_rate + l.leakage_rate)
        .collect();
    let flat_total: f64 = flat.iter().sum();
    let scale = scn.target_count_rate / scn.mean_intensity();
    let probe = match scn.mode {
        CwMode::Interference => scn.probe_ratio.sqrt(),
        CwMode::Bunching => 0.0,
    };
    let beat = TAU * scn.delta_omega;

    let mut amp = OuAmplitude::new(scn.coherence_tau, &mut rng);
    let mut jitter = OuPhase::new(scn.jitter_fwhm, scn.jitter_corr_time, &mut rng);
    let mut bound = BOUND_FACTOR * scn.target_count_rate;
    let expected = (scn.target_count_rate + flat_total) * scn.duration;
    let mut clicks = Vec::with_capacity((expected * 1.05) as usize + 16);
    let mut t = 0.0;
    let mut raised = 0usize;
    loop {
        let u: f64 = rng.random();
        let dt = -(1.0 - u).ln() / (bound + flat_total);
        t += dt;
        if t >= scn.duration {
            break;
        }
        amp.advance(dt, &mut rng);
        jitter.advance(dt, &mut rng);
        let field =
            amp.value() * C64::from_polar(1.0, jitter.phase()) + C64::from_polar(probe, beat * t);
        let signal = scale * field.norm_sqr();
        if signal > bound {
            bound = 1.25 * signal;
            raised += 1;
        }
        let pick = rng.random::<f64>() * (bound + flat_total);
        if pick >= signal + flat_total {
            continue;
        }
        // distribute the accepted candidate over the lines
        let mut acc = 0.0;
        let mut id = chain.lines.len() - 1;
        for (i, (share, bg)) in shares.iter().zip(&flat).enumerate() {
            acc += share * signal + bg;
            if pick < acc {
                id = i;
                break;
            }
        }
        clicks.push(ClickRecord {
            detector_id: id as u32,
            timestamp: t,
        });
    }
    if raised > 0 {
        log::debug!("thinning bound raised {raised} times, final {bound:.1} Hz");
    }
    Ok(clicks)
}
