//! Weighted nonlinear least squares for the model families used in the
//! analysis pipelines.

mod lm;
mod models;

pub use lm::{fit_model, FitResult};
pub use models::{wrap_phase, FitModel};

use std::f64::consts::TAU;

use crate::error::{ensure, invalid, Error, Result};

/// Inverse-variance weights for Poisson counts, floored at one count.
pub fn poisson_weights(counts: &[f64]) -> Vec<f64> {
    counts.iter().map(|&c| 1.0 / c.max(1.0)).collect()
}

/// Closed-form weighted linear regression `y = a + b x`.
pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<(f64, f64)> {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    if det.is_nan() || det.abs() <= 1e-300 {
        return Err(Error::SingularMatrix);
    }
    Ok(((sxx * sy - sx * sxy) / det, (s * sxy - sx * sy) / det))
}

/// `[A, tau]` for `A exp(-x/tau)` from a log-linear regression over the
/// positive samples.
pub fn guess_exponential(xs: &[f64], ys: &[f64]) -> Result<[f64; 2]> {
    let (lx, ly, lw): (Vec<f64>, Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x, y.ln(), y))
        .fold((vec![], vec![], vec![]), |mut acc, (x, l, w)| {
            acc.0.push(x);
            acc.1.push(l);
            acc.2.push(w);
            acc
        });
    ensure(lx.len() >= 2, "data", "fewer than two positive samples")?;
    let (a, b) = weighted_line(&lx, &ly, &lw)?;
    let span =
        lx.iter().cloned().fold(f64::MIN, f64::max) - lx.iter().cloned().fold(f64::MAX, f64::min);
    let tau = if b < 0.0 {
        -1.0 / b
    } else {
        span.max(f64::MIN_POSITIVE)
    };
    Ok([a.exp(), tau])
}

/// Least-squares projection onto `sin` and `cos` at a fixed period,
/// returning `(V, phi)` for `V sin(2 pi x / P + phi)`, with `V >= 0`.
pub fn guess_sinusoid(xs: &[f64], ys: &[f64], ws: &[f64], period: f64) -> Result<(f64, f64)> {
    let (mut ss, mut sc, mut cc, mut ys_, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let (s, c) = (TAU * x / period).sin_cos();
        ss += w * s * s;
        sc += w * s * c;
        cc += w * c * c;
        ys_ += w * y * s;
        yc += w * y * c;
    }
    let det = ss * cc - sc * sc;
    if det.is_nan() || det.abs() <= 1e-300 {
        return Err(Error::SingularMatrix);
    }
    // y = u sin + v cos with u = V cos(phi), v = V sin(phi)
    let u = (cc * ys_ - sc * yc) / det;
    let v = (ss * yc - sc * ys_) / det;
    Ok((u.hypot(v), v.atan2(u)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `[tau_min, tau_max, r]` from medians of the lowest and highest thirds of
/// the drive axis and the drive at the half-way crossing.
pub fn guess_tls(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    ensure(xs.len() >= 3, "data", "need at least three points")?;
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let third = (pts.len() / 3).max(1);
    let lo = median(pts[..third].iter().map(|p| p.1).collect());
    let hi = median(pts[pts.len() - third..].iter().map(|p| p.1).collect());
    let mid = 0.5 * (lo + hi);
    let r = pts
        .iter()
        .find(|p| (p.1 - mid) * (hi - lo) >= 0.0 && p.0 > 0.0)
        .map(|p| p.0)
        .unwrap_or_else(|| median(pts.iter().map(|p| p.0).collect()).max(1e-12));
    Ok([lo, hi, r.max(1e-12)])
}

/// `[A, mu, sigma]` from weighted moments of a nonnegative profile.
pub fn guess_gaussian(xs: &[f64], ys: &[f64]) -> Result<[f64; 3]> {
    let total: f64 = ys.iter().map(|y| y.max(0.0)).sum();
    ensure(total > 0.0, "data", "no positive samples")?;
    let mu = xs.iter().zip(ys).map(|(x, y)| x * y.max(0.0)).sum::<f64>() / total;
    let var = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mu).powi(2) * y.max(0.0))
        .sum::<f64>()
        / total;
    let peak = ys.iter().cloned().fold(f64::MIN, f64::max);
    ensure(var > 0.0, "data", "zero spread")?;
    Ok([peak, mu, var.sqrt()])
}

/// FWHM of a Gaussian with standard deviation `sigma`.
pub fn gaussian_fwhm(sigma: f64) -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * sigma
}

/// `(A, tau, phi)` for `A exp(-x/tau) sin(2 pi x / P + phi)`: quadrature
/// projections over one-period windows give the envelope, whose log-linear
/// slope gives `tau`.
pub fn envelope_guess(xs: &[f64], ys: &[f64], period: f64) -> Result<(f64, f64, f64)> {
    ensure(
        period > 0.0 && period.is_finite(),
        "period",
        "must be positive",
    )?;
    let x0 = xs.iter().cloned().fold(f64::MAX, f64::min);
    let x1 = xs.iter().cloned().fold(f64::MIN, f64::max);
    let windows = ((x1 - x0) / period).floor() as usize;
    let mut centers = vec![];
    let mut amps = vec![];
    let mut phase = None;
    for w in 0..windows {
        let (lo, hi) = (x0 + w as f64 * period, x0 + (w + 1) as f64 * period);
        let (wx, wy): (Vec<f64>, Vec<f64>) = xs
            .iter()
            .zip(ys)
            .filter(|(x, _)| **x >= lo && **x < hi)
            .map(|(x, y)| (*x, *y))
            .unzip();
        if wx.len() < 4 {
            continue;
        }
        let Ok((a, phi)) = guess_sinusoid(&wx, &wy, &vec![1.0; wx.len()], period) else {
            continue;
        };
        phase.get_or_insert(phi);
        centers.push(0.5 * (lo + hi));
        amps.push(a);
    }
    if centers.len() < 2 {
        let (a, phi) = guess_sinusoid(xs, ys, &vec![1.0; xs.len()], period)?;
        return Ok((a.max(1e-12), ((x1 - x0) / 3.0).max(f64::MIN_POSITIVE), phi));
    }
    // weight windows by amplitude so the noise floor does not flatten the slope
    let logs: Vec<f64> = amps.iter().map(|a| a.max(1e-12).ln()).collect();
    let ws: Vec<f64> = amps.iter().map(|a| a * a).collect();
    let (c, slope) = weighted_line(&centers, &logs, &ws)?;
    let tau = if slope < 0.0 { -1.0 / slope } else { x1 - x0 };
    Ok((
        c.exp().max(1e-12),
        tau.max(f64::MIN_POSITIVE),
        phase.unwrap_or(0.0),
    ))
}

/// Deterministic starting point for each model family.
pub fn initial_guess(model: FitModel, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    ensure(
        !xs.is_empty() && xs.len() == ys.len(),
        "data",
        "empty or mismatched",
    )?;
    let ones = vec![1.0; xs.len()];
    Ok(match model {
        FitModel::Exponential => guess_exponential(xs, ys)?.to_vec(),
        FitModel::ExponentialOffset => {
            let c = median(ys[ys.len() - (ys.len() / 5).max(1)..].to_vec());
            let shifted: Vec<f64> = ys.iter().map(|y| y - c).collect();
            let [a, tau] = guess_exponential(xs, &shifted)?;
            vec![c, a, tau]
        }
        FitModel::DecayingSinusoid { period, offset } => {
            let c = offset.unwrap_or_else(|| ys.iter().sum::<f64>() / ys.len() as f64);
            let per =
                period.ok_or_else(|| invalid("period", "a free period needs an explicit guess"))?;
            let centered: Vec<f64> = ys.iter().map(|y| y - c).collect();
            let (a, tau, phi) = envelope_guess(xs, &centered, per)?;
            let mut p = vec![a, tau, phi];
            if period.is_none() {
                p.push(per);
            }
            if offset.is_none() {
                p.push(c);
            }
            p
        }
        FitModel::Sinusoid { period } => {
            let (v, phi) = guess_sinusoid(xs, ys, &ones, period)?;
            vec![v, phi]
        }
        FitModel::Gaussian => guess_gaussian(xs, ys)?.to_vec(),
        FitModel::TlsSaturation => guess_tls(xs, ys)?.to_vec(),
        FitModel::G2Decay => {
            let shifted: Vec<f64> = ys.iter().map(|y| y - 1.0).collect();
            let [a, tau] = guess_exponential(xs, &shifted)?;
            vec![1.0 / tau, 1.0 / a]
        }
        FitModel::Linear => {
            let (a, b) = weighted_line(xs, ys, &ones)?;
            vec![a, b]
        }
        FitModel::BeatWithBunching { period } => {
            let tail = ys.len() - (ys.len() / 5).max(1);
            let c = median(ys[tail..].to_vec());
            let centered: Vec<f64> = ys.iter().map(|y| y - c).collect();
            let env = envelope_guess(xs, &centered, period)?;
            let head = (ys.len() / 20).max(1);
            let b =
                (centered[..head].iter().sum::<f64>() / head as f64).max(0.05 * env.0.max(1e-3));
            vec![c, b, env.1 * 0.5, env.0, env.1, env.2]
        }
    })
}

/// Guess-then-fit convenience wrapper.
pub fn fit_auto(model: FitModel, xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<FitResult> {
    let guess = initial_guess(model, xs, ys)?;
    fit_model(model, xs, ys, weights, &guess)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityFit {
    pub visibility: f64,
    pub sd: f64,
    pub phase: f64,
    pub fit: FitResult,
}

/// Fits `E = V sin(2 pi f x + phi)` at the fixed detuning `f` (Hz) with
/// weights `1/sd^2`.
pub fn visibility_from_e(
    delta_taus: &[f64],
    e_values: &[f64],
    sds: &[f64],
    detuning_hz: f64,
) -> Result<VisibilityFit> {
    ensure(
        detuning_hz.is_finite() && detuning_hz > 0.0,
        "detuning",
        "must be positive",
    )?;
    if delta_taus.len() != e_values.len() || delta_taus.len() != sds.len() {
        return Err(Error::DimensionMismatch(
            "delays, E values and s.d. differ in length".into(),
        ));
    }
    ensure(delta_taus.len() >= 8, "data", "need at least 8 points")?;
    let period = 1.0 / detuning_hz;
    let span = delta_taus.iter().cloned().fold(f64::MIN, f64::max)
        - delta_taus.iter().cloned().fold(f64::MAX, f64::min);
    ensure(
        span >= period * (1.0 - 1e-9),
        "delays",
        format!("span {span:.3e} s shorter than one period {period:.3e} s"),
    )?;
    ensure(
        sds.iter().all(|s| s.is_finite() && *s > 0.0),
        "standard deviations",
        "must be positive",
    )?;
    let ws: Vec<f64> = sds.iter().map(|s| 1.0 / (s * s)).collect();
    let model = FitModel::Sinusoid { period };
    let (v, phi) = guess_sinusoid(delta_taus, e_values, &ws, period)?;
    let fit = fit_model(model, delta_taus, e_values, &ws, &[v.max(1e-12), phi])?;
    Ok(VisibilityFit {
        visibility: fit.params[0],
        sd: fit.sds[0],
        phase: fit.params[1],
        fit,
    })
}
