use serde::{Deserialize, Serialize};

use super::ClickRecord;
use crate::error::{ensure, invalid, Error, Result};
use crate::estimation::{fit_model, initial_guess, poisson_weights, FitModel, FitResult};

/// Minimum number of series points for a decay fit.
pub const MIN_DECAY_POINTS: usize = 20;
/// Slow-exponential fit starts at this multiple of the fast timescale.
pub const SLOW_MASK_FACTOR: f64 = 5.0;

/// Delay histogram with uniform bins starting at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|i| (i as f64 + 0.5) * self.bin_width)
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn max_delay(&self) -> f64 {
        self.bin_width * self.counts.len() as f64
    }
}

/// Histogram of the delay between each click and its immediate successor,
/// over all lines merged. Delays at or beyond `max_delay` are dropped.
pub fn successive_diff_histogram(
    clicks: &[ClickRecord],
    bin_width: f64,
    max_delay: f64,
) -> Result<Histogram> {
    if clicks.len() < 2 {
        return Err(Error::EmptyInput("need at least two clicks"));
    }
    ensure(
        bin_width > 0.0 && bin_width.is_finite(),
        "bin_width",
        "must be positive",
    )?;
    ensure(
        max_delay >= bin_width && max_delay.is_finite(),
        "max_delay",
        "must be at least one bin",
    )?;
    let nbins = (max_delay / bin_width).round() as usize;
    let mut counts = vec![0.0; nbins];
    for pair in clicks.windows(2) {
        let dt = pair[1].timestamp - pair[0].timestamp;
        ensure(dt >= 0.0, "clicks", "timestamps must be nondecreasing")?;
        let bin = (dt / bin_width) as usize;
        if bin < nbins {
            counts[bin] += 1.0;
        }
    }
    Ok(Histogram { bin_width, counts })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundOptions {
    /// Expected timescale of the bunching term, s.
    pub fast_timescale_guess: f64,
    /// Beat frequency present in the series, Hz. When set the fast term is
    /// fitted jointly with a decaying sinusoid.
    pub detuning_hz: Option<f64>,
    /// Subtract the fitted fast term; off when the bunching is the signal.
    pub remove_fast: bool,
}

impl Default for BackgroundOptions {
    fn default() -> Self {
        Self {
            fast_timescale_guess: 10e-6,
            detuning_hz: None,
            remove_fast: true,
        }
    }
}

/// Normalized coincidence series with per-point standard deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedSeries {
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub sds: Vec<f64>,
    pub slow: FitResult,
    pub fast: Option<FitResult>,
}

impl CorrectedSeries {
    pub fn max_delay(&self) -> f64 {
        self.delays.last().copied().unwrap_or(0.0)
    }
}

fn significant(fit: &FitResult, index: usize) -> bool {
    fit.converged && fit.sds[index].is_finite() && fit.params[index].abs() > 2.0 * fit.sds[index]
}

/// Divides out the slow exponential set by the count rate and, optionally,
/// removes the faster bunching exponential.
pub fn correct_background(
    hist: &Histogram,
    count_rate_guess: f64,
    opts: &BackgroundOptions,
) -> Result<CorrectedSeries> {
    if hist.counts.is_empty() {
        return Err(Error::EmptyInput("histogram has no bins"));
    }
    ensure(
        count_rate_guess > 0.0 && count_rate_guess.is_finite(),
        "count_rate_guess",
        "must be positive",
    )?;
    ensure(
        opts.fast_timescale_guess > 0.0,
        "fast_timescale_guess",
        "must be positive",
    )?;
    let xs = hist.centers();
    let mask = SLOW_MASK_FACTOR * opts.fast_timescale_guess;
    let start = xs.iter().position(|&x| x > mask).unwrap_or(xs.len());
    ensure(
        xs.len() - start >= 3,
        "histogram",
        format!("fewer than 3 bins beyond {mask:.3e} s for the slow fit"),
    )?;
    let (sx, sy) = (&xs[start..], &hist.counts[start..]);
    let tail_mean = sy.iter().sum::<f64>() / sy.len() as f64;
    ensure(tail_mean > 0.0, "histogram", "no counts in the slow region")?;
    let tau_slow = 1.0 / count_rate_guess;
    let xm = sx.iter().sum::<f64>() / sx.len() as f64;
    let guess = [tail_mean * (xm / tau_slow).exp(), tau_slow];
    let slow = fit_model(FitModel::Exponential, sx, sy, &poisson_weights(sy), &guess)?;
    if !slow.converged {
        return Err(Error::FitFailed("slow exponential did not converge".into()));
    }

    let base: Vec<f64> = xs.iter().map(|&x| slow.predict(x)).collect();
    let mut values: Vec<f64> = hist.counts.iter().zip(&base).map(|(c, b)| c / b).collect();
    let mut sds: Vec<f64> = hist
        .counts
        .iter()
        .zip(&base)
        .map(|(c, b)| c.max(1.0).sqrt() / b)
        .collect();
    let ws: Vec<f64> = sds.iter().map(|s| 1.0 / (s * s)).collect();

    let fast = match opts.detuning_hz {
        Some(f) => {
            ensure(f > 0.0 && f.is_finite(), "detuning_hz", "must be positive")?;
            let model = FitModel::BeatWithBunching { period: 1.0 / f };
            let mut g = initial_guess(model, &xs, &values)?;
            g[2] = opts.fast_timescale_guess;
            fit_model(model, &xs, &values, &ws, &g)
                .ok()
                .filter(|r| significant(r, 1))
        }
        None => {
            let mut g = initial_guess(FitModel::ExponentialOffset, &xs, &values)?;
            g[2] = opts.fast_timescale_guess;
            fit_model(FitModel::ExponentialOffset, &xs, &values, &ws, &g)
                .ok()
                .filter(|r| significant(r, 1))
        }
    };
    if let Some(fit) = &fast {
        let (c, b, tf) = (fit.params[0], fit.params[1], fit.params[2]);
        if c <= 0.0 {
            return Err(Error::FitFailed(format!("nonpositive fitted offset {c}")));
        }
        for ((v, s), &x) in values.iter_mut().zip(sds.iter_mut()).zip(&xs) {
            if opts.remove_fast {
                *v -= b * (-x / tf).exp();
            }
            *v /= c;
            *s /= c;
        }
    } else {
        log::debug!("fast background term not significant; slow correction only");
    }
    Ok(CorrectedSeries {
        delays: xs,
        values,
        sds,
        slow,
        fast,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKind {
    /// `1 + A exp(-x/tau) sin(2 pi f x + phi)`; the period is fitted too when
    /// `free_period` is set.
    Sinusoid { detuning_hz: f64, free_period: bool },
    /// `1 + exp(-Gamma x) / n`.
    Plain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayEstimate {
    pub tau: f64,
    pub sd: f64,
    pub fit: FitResult,
}

impl DecayEstimate {
    /// Fitted oscillation period for a free-period sinusoid fit.
    pub fn period(&self) -> Option<(f64, f64)> {
        self.fit.param("period")
    }

    /// Zero-delay correlation of a plain fit.
    pub fn g2_zero(&self) -> Option<(f64, f64)> {
        self.fit
            .param("n_therm")
            .map(|(n, sd)| (1.0 + 1.0 / n, sd / (n * n)))
    }
}

pub fn extract_decay(series: &CorrectedSeries, kind: DecayKind) -> Result<DecayEstimate> {
    let n = series.values.len();
    ensure(
        n >= MIN_DECAY_POINTS,
        "series",
        format!("{n} points, need at least {MIN_DECAY_POINTS}"),
    )?;
    if series.delays.len() != n || series.sds.len() != n {
        return Err(Error::DimensionMismatch(
            "series columns differ in length".into(),
        ));
    }
    let ws: Vec<f64> = series
        .sds
        .iter()
        .map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 0.0 })
        .collect();
    let (xs, ys) = (&series.delays, &series.values);
    let (fit, tau, sd) = match kind {
        DecayKind::Sinusoid {
            detuning_hz,
            free_period,
        } => {
            ensure(
                detuning_hz > 0.0 && detuning_hz.is_finite(),
                "detuning_hz",
                "must be positive",
            )?;
            let period = 1.0 / detuning_hz;
            let fixed = FitModel::DecayingSinusoid {
                period: Some(period),
                offset: Some(1.0),
            };
            let mut guess = initial_guess(fixed, xs, ys)?;
            let model = if free_period {
                guess.push(period);
                FitModel::DecayingSinusoid {
                    period: None,
                    offset: Some(1.0),
                }
            } else {
                fixed
            };
            let fit = fit_model(model, xs, ys, &ws, &guess)?;
            let (tau, sd) = (fit.params[1], fit.sds[1]);
            (fit, tau, sd)
        }
        DecayKind::Plain => {
            let fit = fit_model(
                FitModel::G2Decay,
                xs,
                ys,
                &ws,
                &initial_guess(FitModel::G2Decay, xs, ys)?,
            )?;
            let gamma = fit.params[0];
            (fit.clone(), 1.0 / gamma, fit.sds[0] / (gamma * gamma))
        }
    };
    if !fit.converged {
        return Err(Error::FitFailed(format!(
            "{} fit did not converge",
            fit.model.name()
        )));
    }
    let limit = 10.0 * series.max_delay();
    if !(tau > 0.0 && tau < limit) {
        return Err(invalid(
            "tau",
            format!("{tau:.3e} s outside (0, {limit:.3e}) s"),
        ));
    }
    Ok(DecayEstimate { tau, sd, fit })
}
