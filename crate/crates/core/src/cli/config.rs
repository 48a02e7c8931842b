use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clickstream::{CwMode, CwScenario, DetectionChain};
use crate::dynamics::{OccupationProfile, TlsParams};
use crate::error::{ensure, Error, Result};
use crate::protocol::{DeviceParams, DEFAULT_SETUP_VISIBILITY};

/// Drive of the default bunching run; keeps the bunching time well below
/// the mean click spacing.
pub const DEFAULT_BUNCHING_N_C: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Herald,
    SuperpositionVisibility,
    VisibilityDecay,
    G2Decay,
    CwCoherence,
    Bunching,
    TlsSweep,
    Thermometry,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Herald,
        Experiment::SuperpositionVisibility,
        Experiment::VisibilityDecay,
        Experiment::G2Decay,
        Experiment::CwCoherence,
        Experiment::Bunching,
        Experiment::TlsSweep,
        Experiment::Thermometry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Herald => "herald",
            Experiment::SuperpositionVisibility => "superposition-visibility",
            Experiment::VisibilityDecay => "visibility-decay",
            Experiment::G2Decay => "g2-decay",
            Experiment::CwCoherence => "cw-coherence",
            Experiment::Bunching => "bunching",
            Experiment::TlsSweep => "tls-sweep",
            Experiment::Thermometry => "thermometry",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Herald => "heralded phonon populations after a Stokes detection",
            Experiment::SuperpositionVisibility => {
                "superposition weight and readout visibility versus WCS ratio"
            }
            Experiment::VisibilityDecay => {
                "visibility against storage delay with an exponential T2* fit"
            }
            Experiment::G2Decay => {
                "photon-phonon cross-correlation against delay with bound crossings"
            }
            Experiment::CwCoherence => {
                "simulated CW beat clicks, background correction and decay fit"
            }
            Experiment::Bunching => "simulated sideband bunching clicks and g2 decay fit",
            Experiment::TlsSweep => {
                "coherence time against intracavity photons with saturation fit"
            }
            Experiment::Thermometry => {
                "sideband-asymmetry occupation estimates from simulated counts"
            }
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// `[herald]`: populations use `device.p_b` unless overridden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeraldBlock {
    pub p_b: Option<f64>,
    /// Initial mechanical occupation (quanta).
    pub n_init: f64,
    /// Fock cutoff per mode.
    pub dim: usize,
}

impl Default for HeraldBlock {
    fn default() -> Self {
        Self {
            p_b: None,
            n_init: 0.1,
            dim: 8,
        }
    }
}

/// `[superposition]`: operating point plus an optional ratio sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperpositionBlock {
    pub n_init: f64,
    /// Count-rate ratio `C_WCS / C_b` at the operating point.
    pub ratio: f64,
    /// Readout reference amplitude; matched to the stored mean phonon
    /// number when absent.
    pub beta: Option<f64>,
    pub setup_visibility: f64,
    /// Stokes/WCS beamsplitter angle, rad.
    pub mixing_angle: f64,
    pub dim: usize,
    pub phase_steps: usize,
    /// Additional ratios for the sweep table.
    pub sweep_ratios: Vec<f64>,
}

impl Default for SuperpositionBlock {
    fn default() -> Self {
        Self {
            n_init: 0.1,
            ratio: 7.0,
            beta: None,
            setup_visibility: DEFAULT_SETUP_VISIBILITY,
            mixing_angle: std::f64::consts::FRAC_PI_4,
            dim: 6,
            phase_steps: 16,
            sweep_ratios: vec![0.25, 0.5, 1.0, 2.0, 4.0, 7.0, 10.0],
        }
    }
}

/// `[visibility_decay]`: `V(t) = V0 exp(-t / T2*)` sampled with Gaussian
/// noise, where `T2*` is the steady-state TLS time at the averaged drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityDecayBlock {
    /// Visibility at zero delay; taken from the superposition operating
    /// point when absent.
    pub v0: Option<f64>,
    /// Duty-cycle averaged intracavity photons.
    pub n_c_avg: f64,
    /// Storage delays, s.
    pub delays: Vec<f64>,
    /// Absolute standard deviation of each simulated visibility.
    pub noise_sd: f64,
}

impl Default for VisibilityDecayBlock {
    fn default() -> Self {
        Self {
            v0: None,
            n_c_avg: 1e-8,
            delays: (0..13).map(|i| i as f64 * 5e-6).collect(),
            noise_sd: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OccupationSource {
    /// CSV file with a `delay_s,occupation` header.
    Csv {
        csv: PathBuf,
    },
    Profile(OccupationProfile),
}

/// `[g2_decay]`: the built-in heating table is used when `occupation` is
/// absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2DecayBlock {
    pub occupation: Option<OccupationSource>,
    /// Energy decay rate, 1/s; `device.gamma_m` when absent.
    pub gamma_m: Option<f64>,
    /// Log-spaced delay grid, s.
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for G2DecayBlock {
    fn default() -> Self {
        Self {
            occupation: None,
            gamma_m: None,
            t_min: 1e-6,
            t_max: 10e-3,
            points: 200,
        }
    }
}

/// `[analysis]` for the click experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Histogram bin width, s.
    pub bin_width: f64,
    /// Largest successive delay kept, s.
    pub max_delay: f64,
    /// Bunching timescale used to mask the slow fit, s; derived from the
    /// scenario when absent.
    pub fast_timescale_guess: Option<f64>,
    /// Fit the beat period instead of fixing it to the probe detuning.
    pub free_period: bool,
    /// Also write the raw click file.
    pub write_clicks: bool,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            bin_width: 0.5e-6,
            max_delay: 500e-6,
            fast_timescale_guess: None,
            free_period: true,
            write_clicks: false,
        }
    }
}

/// `[tls]`: model parameters and the drive sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlsBlock {
    pub params: TlsParams,
    /// Intracavity photon numbers of the sweep.
    pub n_c: Vec<f64>,
    /// Relative noise of the simulated coherence times.
    pub relative_noise: f64,
}

impl Default for TlsBlock {
    fn default() -> Self {
        Self {
            params: TlsParams::REFERENCE,
            n_c: (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect(),
            relative_noise: 0.1,
        }
    }
}

/// `[thermometry]`: Stokes and anti-Stokes counts drawn as Poisson
/// variables in the ratio `(n + 1) : n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometryBlock {
    /// True occupations.
    pub n_therm: Vec<f64>,
    /// Expected Stokes counts per point.
    pub stokes_counts: f64,
}

impl Default for ThermometryBlock {
    fn default() -> Self {
        Self {
            n_therm: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            stokes_counts: 1e5,
        }
    }
}

/// A complete run description. Frequencies are in Hz, times in s, rates in
/// 1/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// Run directory, relative to the output root unless absolute.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub detection: DetectionChain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herald: Option<HeraldBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superposition: Option<SuperpositionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_decay: Option<VisibilityDecayBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2_decay: Option<G2DecayBlock>,
    /// Scenario for the click experiments; its seed is overridden by `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cw: Option<CwScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls: Option<TlsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermometry: Option<ThermometryBlock>,
}

impl ScenarioConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            output: None,
            device: DeviceParams::default(),
            detection: DetectionChain::default(),
            herald: None,
            superposition: None,
            visibility_decay: None,
            g2_decay: None,
            cw: None,
            analysis: None,
            tls: None,
            thermometry: None,
        }
    }

    fn present_blocks(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            ("herald", self.herald.is_some()),
            ("superposition", self.superposition.is_some()),
            ("visibility_decay", self.visibility_decay.is_some()),
            ("g2_decay", self.g2_decay.is_some()),
            ("cw", self.cw.is_some()),
            ("analysis", self.analysis.is_some()),
            ("tls", self.tls.is_some()),
            ("thermometry", self.thermometry.is_some()),
        ];
        for (name, present) in flags {
            if present {
                out.push(name);
            }
        }
        out
    }

    /// Blocks each experiment reads.
    pub fn allowed_blocks(experiment: Experiment) -> &'static [&'static str] {
        match experiment {
            Experiment::Herald => &["herald"],
            Experiment::SuperpositionVisibility => &["superposition"],
            Experiment::VisibilityDecay => &["superposition", "visibility_decay", "tls"],
            Experiment::G2Decay => &["g2_decay"],
            Experiment::CwCoherence | Experiment::Bunching => &["cw", "analysis"],
            Experiment::TlsSweep => &["tls"],
            Experiment::Thermometry => &["thermometry"],
        }
    }

    pub fn herald(&self) -> HeraldBlock {
        self.herald.clone().unwrap_or_default()
    }

    pub fn superposition(&self) -> SuperpositionBlock {
        self.superposition.clone().unwrap_or_default()
    }

    pub fn visibility_decay(&self) -> VisibilityDecayBlock {
        self.visibility_decay.clone().unwrap_or_default()
    }

    pub fn g2_decay(&self) -> G2DecayBlock {
        self.g2_decay.clone().unwrap_or_default()
    }

    pub fn analysis(&self) -> AnalysisBlock {
        self.analysis.clone().unwrap_or_default()
    }

    pub fn tls(&self) -> TlsBlock {
        self.tls.clone().unwrap_or_default()
    }

    pub fn thermometry(&self) -> ThermometryBlock {
        self.thermometry.clone().unwrap_or_default()
    }

    /// Click scenario with the run seed and the experiment's mode. A bunching
    /// run without an explicit scenario drives `n_c = 10` and uses the
    /// theoretical bunching rate for the field correlation time.
    pub fn cw(&self) -> Result<CwScenario> {
        let mut scn = self.cw.unwrap_or_default();
        scn.seed = self.seed;
        if self.experiment == Experiment::Bunching {
            scn.mode = CwMode::Bunching;
            if self.cw.is_none() {
                scn.n_c = DEFAULT_BUNCHING_N_C;
                let rate = crate::dynamics::bunching_rate_theory(
                    scn.n_c,
                    &self.device,
                    self.device.gamma_m,
                )?;
                scn.coherence_tau = 2.0 / rate;
            }
        } else {
            scn.mode = CwMode::Interference;
        }
        Ok(scn)
    }

    /// Unit and range checks for every block the experiment reads.
    pub fn validate(&self) -> Result<()> {
        let allowed = Self::allowed_blocks(self.experiment);
        if let Some(extra) = self
            .present_blocks()
            .into_iter()
            .find(|b| !allowed.contains(b))
        {
            return Err(Error::Config(format!(
                "block [{extra}] is not used by experiment `{}`",
                self.experiment
            )));
        }
        self.device.validate()?;
        self.detection.validate()?;
        match self.experiment {
            Experiment::Herald => {
                let h = self.herald();
                let p_b = h.p_b.unwrap_or(self.device.p_b);
                ensure(p_b > 0.0 && p_b < 1.0, "herald.p_b", "must lie in (0, 1)")?;
                ensure(h.n_init >= 0.0, "herald.n_init", "must be >= 0")?;
                ensure(h.dim >= 3, "herald.dim", "must be at least 3")?;
            }
            Experiment::SuperpositionVisibility => validate_superposition(&self.superposition())?,
            Experiment::VisibilityDecay => {
                validate_superposition(&self.superposition())?;
                let v = self.visibility_decay();
                if let Some(v0) = v.v0 {
                    ensure(
                        v0 > 0.0 && v0 <= 1.0,
                        "visibility_decay.v0",
                        "must lie in (0, 1]",
                    )?;
                }
                ensure(v.n_c_avg >= 0.0, "visibility_decay.n_c_avg", "must be >= 0")?;
                ensure(
                    v.noise_sd > 0.0,
                    "visibility_decay.noise_sd",
                    "must be positive",
                )?;
                ensure(
                    v.delays.len() >= 4,
                    "visibility_decay.delays",
                    "need at least 4 delays",
                )?;
                ensure(
                    v.delays.iter().all(|d| *d >= 0.0),
                    "visibility_decay.delays",
                    "must be >= 0 s",
                )?;
                self.tls().params.validate()?;
            }
            Experiment::G2Decay => {
                let g = self.g2_decay();
                if let Some(gm) = g.gamma_m {
                    ensure(gm > 0.0, "g2_decay.gamma_m", "must be positive (1/s)")?;
                }
                ensure(
                    g.t_min > 0.0 && g.t_max > g.t_min,
                    "g2_decay.t_min",
                    "need 0 < t_min < t_max (s)",
                )?;
                ensure(g.points >= 2, "g2_decay.points", "need at least 2")?;
                if let Some(OccupationSource::Profile(p)) = &g.occupation {
                    p.validate()?;
                }
            }
            Experiment::CwCoherence | Experiment::Bunching => {
                self.cw()?.validate()?;
                let a = self.analysis();
                ensure(
                    a.bin_width > 0.0,
                    "analysis.bin_width",
                    "must be positive (s)",
                )?;
                ensure(
                    a.max_delay >= 20.0 * a.bin_width,
                    "analysis.max_delay",
                    "must span at least 20 bins",
                )?;
                if let Some(f) = a.fast_timescale_guess {
                    ensure(
                        f > 0.0,
                        "analysis.fast_timescale_guess",
                        "must be positive (s)",
                    )?;
                }
            }
            Experiment::TlsSweep => {
                let t = self.tls();
                t.params.validate()?;
                ensure(t.n_c.len() >= 4, "tls.n_c", "need at least 4 drive points")?;
                ensure(
                    t.n_c.iter().all(|n| *n > 0.0),
                    "tls.n_c",
                    "must be positive",
                )?;
                ensure(
                    t.relative_noise >= 0.0,
                    "tls.relative_noise",
                    "must be >= 0",
                )?;
            }
            Experiment::Thermometry => {
                let t = self.thermometry();
                ensure(!t.n_therm.is_empty(), "thermometry.n_therm", "empty")?;
                ensure(
                    t.n_therm.iter().all(|n| *n >= 0.0),
                    "thermometry.n_therm",
                    "must be >= 0",
                )?;
                ensure(
                    t.stokes_counts > 0.0,
                    "thermometry.stokes_counts",
                    "must be positive",
                )?;
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn validate_superposition(s: &SuperpositionBlock) -> Result<()> {
    ensure(s.n_init >= 0.0, "superposition.n_init", "must be >= 0")?;
    ensure(s.ratio >= 0.0, "superposition.ratio", "must be >= 0")?;
    ensure(
        s.sweep_ratios.iter().all(|r| *r >= 0.0),
        "superposition.sweep_ratios",
        "must be >= 0",
    )?;
    if let Some(b) = s.beta {
        ensure(b > 0.0, "superposition.beta", "must be positive")?;
    }
    ensure(
        s.setup_visibility > 0.0 && s.setup_visibility <= 1.0,
        "superposition.setup_visibility",
        "must lie in (0, 1]",
    )?;
    ensure(s.dim >= 3, "superposition.dim", "must be at least 3")?;
    ensure(
        s.phase_steps >= 8,
        "superposition.phase_steps",
        "must be at least 8",
    )
}

/// Parses and validates a TOML scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn emit_config(cfg: &ScenarioConfig) -> Result<String> {
    cfg.to_toml()
}
