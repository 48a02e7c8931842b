use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Parametric model families. Parameter order is listed per variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitModel {
    /// `A exp(-x/tau)`: `[A, tau]`.
    Exponential,
    /// `C + A exp(-x/tau)`: `[C, A, tau]`.
    ExponentialOffset,
    /// `c + A exp(-x/tau) sin(2 pi x / P + phi)`: `[A, tau, phi]`, then `P`
    /// when `period` is `None`, then `c` when `offset` is `None`.
    DecayingSinusoid {
        period: Option<f64>,
        offset: Option<f64>,
    },
    /// `V sin(2 pi x / P + phi)`: `[V, phi]`.
    Sinusoid { period: f64 },
    /// `A exp(-(x - mu)^2 / (2 sigma^2))`: `[A, mu, sigma]`.
    Gaussian,
    /// `tau_min + (tau_max - tau_min) / (1 + r / x)`: `[tau_min, tau_max, r]`.
    TlsSaturation,
    /// `1 + exp(-gamma x) / n`: `[gamma, n]`.
    G2Decay,
    /// `a + b x`: `[a, b]`.
    Linear,
    /// `c + B exp(-x/tau_f) + A exp(-x/tau) sin(2 pi x / P + phi)`:
    /// `[c, B, tau_f, A, tau, phi]`.
    BeatWithBunching { period: f64 },
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::Exponential => "exponential",
            FitModel::ExponentialOffset => "exponential_offset",
            FitModel::DecayingSinusoid { .. } => "decaying_sinusoid",
            FitModel::Sinusoid { .. } => "sinusoid",
            FitModel::Gaussian => "gaussian",
            FitModel::TlsSaturation => "tls_saturation",
            FitModel::G2Decay => "g2_decay",
            FitModel::Linear => "linear",
            FitModel::BeatWithBunching { .. } => "beat_with_bunching",
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            FitModel::Exponential
            | FitModel::Sinusoid { .. }
            | FitModel::G2Decay
            | FitModel::Linear => 2,
            FitModel::ExponentialOffset | FitModel::Gaussian | FitModel::TlsSaturation => 3,
            FitModel::BeatWithBunching { .. } => 6,
            FitModel::DecayingSinusoid { period, offset } => {
                3 + usize::from(period.is_none()) + usize::from(offset.is_none())
            }
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        match *self {
            FitModel::Exponential => vec!["amplitude", "tau"],
            FitModel::ExponentialOffset => vec!["offset", "amplitude", "tau"],
            FitModel::DecayingSinusoid { period, offset } => {
                let mut v = vec!["amplitude", "tau", "phase"];
                if period.is_none() {
                    v.push("period");
                }
                if offset.is_none() {
                    v.push("offset");
                }
                v
            }
            FitModel::Sinusoid { .. } => vec!["visibility", "phase"],
            FitModel::Gaussian => vec!["amplitude", "mean", "sigma"],
            FitModel::TlsSaturation => vec!["tau_min", "tau_max", "rate_ratio"],
            FitModel::G2Decay => vec!["gamma", "n_therm"],
            FitModel::Linear => vec!["intercept", "slope"],
            FitModel::BeatWithBunching { .. } => {
                vec![
                    "offset",
                    "bunching",
                    "tau_fast",
                    "amplitude",
                    "tau",
                    "phase",
                ]
            }
        }
    }

    /// Whether a parameter vector lies in the model's domain.
    pub fn admissible(&self, p: &[f64]) -> bool {
        if p.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match *self {
            FitModel::Exponential => p[1] > 0.0,
            FitModel::ExponentialOffset => p[2] > 0.0,
            FitModel::DecayingSinusoid { period, .. } => {
                p[1] > 0.0 && (period.is_some() || p[3] > 0.0)
            }
            FitModel::Gaussian => p[2] > 0.0,
            FitModel::TlsSaturation => p[2] > 0.0,
            FitModel::G2Decay => p[0] > 0.0 && p[1] > 0.0,
            FitModel::BeatWithBunching { .. } => p[2] > 0.0 && p[4] > 0.0,
            FitModel::Sinusoid { .. } | FitModel::Linear => true,
        }
    }

    /// Model value and its gradient with respect to the parameters.
    pub fn eval(&self, p: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        match *self {
            FitModel::Exponential => {
                let e = (-x / p[1]).exp();
                grad[0] = e;
                grad[1] = p[0] * e * x / (p[1] * p[1]);
                p[0] * e
            }
            FitModel::ExponentialOffset => {
                let e = (-x / p[2]).exp();
                grad[0] = 1.0;
                grad[1] = e;
                grad[2] = p[1] * e * x / (p[2] * p[2]);
                p[0] + p[1] * e
            }
            FitModel::DecayingSinusoid { period, offset } => {
                let (a, tau, phi) = (p[0], p[1], p[2]);
                let mut next = 3;
                let per = match period {
                    Some(v) => v,
                    None => {
                        next += 1;
                        p[3]
                    }
                };
                let c = match offset {
                    Some(v) => v,
                    None => p[next],
                };
                let e = (-x / tau).exp();
                let arg = TAU * x / per + phi;
                let (s, co) = arg.sin_cos();
                grad[0] = e * s;
                grad[1] = a * e * s * x / (tau * tau);
                grad[2] = a * e * co;
                let mut k = 3;
                if period.is_none() {
                    grad[k] = -a * e * co * TAU * x / (per * per);
                    k += 1;
                }
                if offset.is_none() {
                    grad[k] = 1.0;
                }
                c + a * e * s
            }
            FitModel::Sinusoid { period } => {
                let (s, c) = (TAU * x / period + p[1]).sin_cos();
                grad[0] = s;
                grad[1] = p[0] * c;
                p[0] * s
            }
            FitModel::Gaussian => {
                let z = (x - p[1]) / p[2];
                let e = (-0.5 * z * z).exp();
                grad[0] = e;
                grad[1] = p[0] * e * z / p[2];
                grad[2] = p[0] * e * z * z / p[2];
                p[0] * e
            }
            FitModel::TlsSaturation => {
                // (tau_max - tau_min) x / (x + r) is finite at x = 0
                let d = x + p[2];
                let f = if d == 0.0 { 0.0 } else { x / d };
                grad[0] = 1.0 - f;
                grad[1] = f;
                grad[2] = if d == 0.0 {
                    0.0
                } else {
                    -(p[1] - p[0]) * x / (d * d)
                };
                p[0] + (p[1] - p[0]) * f
            }
            FitModel::G2Decay => {
                let e = (-p[0] * x).exp();
                grad[0] = -x * e / p[1];
                grad[1] = -e / (p[1] * p[1]);
                1.0 + e / p[1]
            }
            FitModel::Linear => {
                grad[0] = 1.0;
                grad[1] = x;
                p[0] + p[1] * x
            }
            FitModel::BeatWithBunching { period } => {
                let ef = (-x / p[2]).exp();
                let e = (-x / p[4]).exp();
                let (s, c) = (TAU * x / period + p[5]).sin_cos();
                grad[0] = 1.0;
                grad[1] = ef;
                grad[2] = p[1] * ef * x / (p[2] * p[2]);
                grad[3] = e * s;
                grad[4] = p[3] * e * s * x / (p[4] * p[4]);
                grad[5] = p[3] * e * c;
                p[0] + p[1] * ef + p[3] * e * s
            }
        }
    }

    pub fn value(&self, p: &[f64], x: f64) -> f64 {
        let mut g = vec![0.0; self.param_count()];
        self.eval(p, x, &mut g)
    }

    /// Index of a sign-ambiguous amplitude and its paired phase.
    pub(crate) fn sign_fold(&self) -> Option<(usize, usize)> {
        match self {
            FitModel::DecayingSinusoid { .. } => Some((0, 2)),
            FitModel::Sinusoid { .. } => Some((0, 1)),
            FitModel::BeatWithBunching { .. } => Some((3, 5)),
            _ => None,
        }
    }
}

/// Wraps a phase into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}
