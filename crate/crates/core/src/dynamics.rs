//! Rate models: delayed absorption heating, optomechanical damping and the
//! two-level-fluctuator saturation of the coherence time.

use std::f64::consts::TAU;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Error, Result};
use crate::protocol::DeviceParams;

/// Thermal occupation of the mechanical mode as a function of delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OccupationProfile {
    /// `(delay [s], occupation)` nodes, interpolated linearly in log-delay.
    Table { points: Vec<(f64, f64)> },
    /// `baseline + amplitude (exp(-t/fall) - exp(-t/rise))`.
    Parametric {
        baseline: f64,
        amplitude: f64,
        rise_time: f64,
        fall_time: f64,
    },
}

impl OccupationProfile {
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let p = OccupationProfile::Table { points };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OccupationProfile::Table { points } => {
                if points.is_empty() {
                    return Err(Error::EmptyInput("occupation table"));
                }
                for &(t, n) in points {
                    ensure(
                        t.is_finite() && t > 0.0,
                        "delay",
                        format!("{t} must be positive"),
                    )?;
                    ensure(
                        n.is_finite() && n >= 0.0,
                        "occupation",
                        format!("{n} must be >= 0"),
                    )?;
                }
                ensure(
                    points.windows(2).all(|w| w[1].0 > w[0].0),
                    "delays",
                    "must be strictly increasing",
                )
            }
            &OccupationProfile::Parametric {
                baseline,
                amplitude,
                rise_time,
                fall_time,
            } => {
                ensure(
                    baseline.is_finite() && baseline >= 0.0,
                    "baseline",
                    "must be >= 0",
                )?;
                ensure(amplitude.is_finite(), "amplitude", "must be finite")?;
                ensure(
                    rise_time > 0.0 && rise_time.is_finite(),
                    "rise_time",
                    "must be positive",
                )?;
                ensure(
                    fall_time > 0.0 && fall_time.is_finite(),
                    "fall_time",
                    "must be positive",
                )
            }
        }
    }

    /// Reads a `delay_s,occupation` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "delay_s" || &headers[1] != "occupation" {
            return Err(invalid(
                "occupation csv",
                format!(
                    "expected header delay_s,occupation, found {:?}",
                    headers.iter().collect::<Vec<_>>()
                ),
            ));
        }
        let mut points = vec![];
        for row in rdr.deserialize::<(f64, f64)>() {
            points.push(row?);
        }
        Self::table(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Delay of the maximum of the parametric form.
    pub fn parametric_peak(&self) -> Option<f64> {
        match *self {
            OccupationProfile::Parametric {
                rise_time,
                fall_time,
                ..
            } if rise_time != fall_time => {
                Some(rise_time * fall_time * (fall_time / rise_time).ln() / (fall_time - rise_time))
            }
            OccupationProfile::Parametric { rise_time, .. } => Some(rise_time),
            _ => None,
        }
    }
}

pub fn thermal_occupation(profile: &OccupationProfile, delta_tau: f64) -> Result<f64> {
    ensure(
        delta_tau.is_finite() && delta_tau >= 0.0,
        "delta_tau",
        format!("{delta_tau} must be >= 0"),
    )?;
    match profile {
        OccupationProfile::Table { points } => {
            let first = points
                .first()
                .ok_or(Error::EmptyInput("occupation table"))?;
            let last = points[points.len() - 1];
            if delta_tau <= first.0 {
                return Ok(first.1);
            }
            if delta_tau >= last.0 {
                return Ok(last.1);
            }
            let i = points.partition_point(|p| p.0 <= delta_tau);
            let (t0, n0) = points[i - 1];
            let (t1, n1) = points[i];
            let f = (delta_tau.ln() - t0.ln()) / (t1.ln() - t0.ln());
            Ok(n0 + f * (n1 - n0))
        }
        &OccupationProfile::Parametric {
            baseline,
            amplitude,
            rise_time,
            fall_time,
        } => Ok(baseline
            + amplitude * ((-delta_tau / fall_time).exp() - (-delta_tau / rise_time).exp())),
    }
}

/// Optomechanical damping `4 n_c g0^2 / kappa`, as an angular rate in 1/s.
pub fn gamma_opt(n_c: f64, params: &DeviceParams) -> Result<f64> {
    ensure(
        n_c.is_finite() && n_c >= 0.0,
        "n_c",
        format!("{n_c} must be >= 0"),
    )?;
    Ok(TAU * 4.0 * n_c * params.g0 * params.g0 / params.kappa())
}

/// `gamma_m + gamma_opt(n_c)`.
pub fn bunching_rate_theory(n_c: f64, params: &DeviceParams, gamma_m: f64) -> Result<f64> {
    Ok(gamma_m + gamma_opt(n_c, params)?)
}

/// Steady-state saturation model of the classical coherence time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsParams {
    pub tau_min: f64,
    pub tau_max: f64,
    /// Ratio of defect relaxation rate to drive coupling.
    pub rate_ratio: f64,
}

impl TlsParams {
    /// Fit values quoted for the measured device; the rate ratio is not
    /// published and defaults to one photon.
    pub const REFERENCE: TlsParams = TlsParams {
        tau_min: 16e-6,
        tau_max: 112e-6,
        rate_ratio: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.tau_min > 0.0 && self.tau_min <= self.tau_max && self.tau_max.is_finite(),
            "tau",
            format!(
                "need 0 < tau_min <= tau_max, got {} and {}",
                self.tau_min, self.tau_max
            ),
        )?;
        ensure(
            self.rate_ratio > 0.0 && self.rate_ratio.is_finite(),
            "rate_ratio",
            "must be positive",
        )
    }
}

impl Default for TlsParams {
    fn default() -> Self {
        Self::REFERENCE
    }
}

pub fn tls_tau_steady(n_c: f64, p: &TlsParams) -> Result<f64> {
    p.validate()?;
    ensure(
        n_c.is_finite() || n_c == f64::INFINITY,
        "n_c",
        "must not be NaN",
    )?;
    ensure(n_c >= 0.0, "n_c", format!("{n_c} must be >= 0"))?;
    if n_c == 0.0 {
        return Ok(p.tau_min);
    }
    if n_c.is_infinite() {
        return Ok(p.tau_max);
    }
    Ok(p.tau_min + (p.tau_max - p.tau_min) / (1.0 + p.rate_ratio / n_c))
}

/// Rate equation `dtau/dt = g n_c (tau_max - tau) - gamma tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsOde {
    pub g_def: f64,
    pub gamma_def: f64,
    pub tau_max: f64,
}

impl TlsOde {
    pub fn fixed_point(&self, n_c: f64) -> f64 {
        let drive = self.g_def * n_c;
        drive * self.tau_max / (drive + self.gamma_def)
    }

    fn rhs(&self, n_c: f64, tau: f64) -> f64 {
        self.g_def * n_c * (self.tau_max - tau) - self.gamma_def * tau
    }
}

/// Intracavity photon number held constant from each start time onwards.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseDrive {
    steps: Vec<(f64, f64)>,
}

impl PiecewiseDrive {
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::EmptyInput("drive steps"));
        }
        ensure(
            steps.windows(2).all(|w| w[1].0 > w[0].0),
            "drive",
            "start times must increase",
        )?;
        ensure(
            steps.iter().all(|s| s.1 >= 0.0 && s.1.is_finite()),
            "drive",
            "photon numbers must be >= 0",
        )?;
        Ok(Self { steps })
    }

    pub fn constant(n_c: f64) -> Result<Self> {
        Self::new(vec![(0.0, n_c)])
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.steps.partition_point(|s| s.0 <= t);
        self.steps[i.saturating_sub(1)].1
    }

    fn max(&self) -> f64 {
        self.steps.iter().map(|s| s.1).fold(0.0, f64::max)
    }
}

/// Classical fourth-order Runge-Kutta integration of [`TlsOde`], returning
/// `(t, tau)` samples including both endpoints.
pub fn tls_tau_evolve(
    drive: &PiecewiseDrive,
    ode: &TlsOde,
    tau0: f64,
    duration: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>> {
    ensure(dt > 0.0 && dt.is_finite(), "dt", "must be positive")?;
    ensure(
        duration >= 0.0 && duration.is_finite(),
        "duration",
        "must be >= 0",
    )?;
    ensure(
        ode.g_def >= 0.0 && ode.gamma_def >= 0.0 && ode.tau_max > 0.0,
        "tls rates",
        "g_def, gamma_def must be >= 0 and tau_max > 0",
    )?;
    let stiffness = ode.g_def * drive.max() + ode.gamma_def;
    // RK4 stability limit on the real axis
    if stiffness * dt > 2.78 {
        return Err(Error::Unstable(format!(
            "dt = {dt:.3e} s exceeds the stability limit {:.3e} s",
            2.78 / stiffness
        )));
    }
    let steps = (duration / dt).ceil() as usize;
    let h = if steps == 0 {
        0.0
    } else {
        duration / steps as f64
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut tau = tau0;
    out.push((0.0, tau));
    for i in 0..steps {
        let t = i as f64 * h;
        // the drive is sampled once per step, so grid-aligned switches are exact
        let n = drive.at(t + 0.5 * h);
        let k1 = ode.rhs(n, tau);
        let k2 = ode.rhs(n, tau + 0.5 * h * k1);
        let k3 = ode.rhs(n, tau + 0.5 * h * k2);
        let k4 = ode.rhs(n, tau + h * k3);
        tau += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(((i + 1) as f64 * h, tau));
    }
    Ok(out)
}
