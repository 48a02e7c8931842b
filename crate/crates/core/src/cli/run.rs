use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde_json::{json, Value};

use super::config::{Experiment, OccupationSource, ScenarioConfig};
use crate::clickstream::{
    correct_background, extract_decay, simulate_clicks, successive_diff_histogram,
    write_clicks_path, write_histogram, BackgroundOptions, DecayKind,
};
use crate::dynamics::{thermal_occupation, tls_tau_steady, OccupationProfile};
use crate::error::{Error, Result};
use crate::estimation::{fit_auto, fit_model, initial_guess, FitModel};
use crate::protocol::{
    bell_bound, classical_bound, g2_crossing, g2_om_model, heralded_phonon_state,
    prepare_superposition, readout_visibility, sideband_asymmetry_occupancy, stokes_mean_photons,
    HeraldConfig,
};

/// Environment variable holding the output root for relative run
/// directories.
pub const OUTPUT_ROOT_ENV: &str = "PHONMEM_OUTPUT_ROOT";

const FIG2B_TABLE: &str = include_str!("../../data/occupation_fig2b.csv");

/// Built-in heating profile of the mechanical mode after a pulse.
pub fn default_occupation_profile() -> Result<OccupationProfile> {
    OccupationProfile::from_csv_reader(FIG2B_TABLE.as_bytes())
}

/// Files written by a run, relative to its directory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub results: Value,
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        fs::write(
            self.dir.join(name),
            serde_json::to_string_pretty(value)? + "\n",
        )?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Run directory for `cfg` under `root`.
pub fn resolve_output_dir(cfg: &ScenarioConfig, root: &Path) -> PathBuf {
    let rel = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.experiment.name()));
    if rel.is_absolute() {
        rel
    } else {
        root.join(rel)
    }
}

/// Executes the experiment, writing its tables, `results.json` and
/// `manifest.json` into `dir`.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let mut sink = Sink {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    let results = match cfg.experiment {
        Experiment::Herald => herald(cfg, &mut sink),
        Experiment::SuperpositionVisibility => superposition(cfg, &mut sink),
        Experiment::VisibilityDecay => visibility_decay(cfg, &mut sink),
        Experiment::G2Decay => g2_decay(cfg, &mut sink),
        Experiment::CwCoherence => cw_coherence(cfg, &mut sink),
        Experiment::Bunching => bunching(cfg, &mut sink),
        Experiment::TlsSweep => tls_sweep(cfg, &mut sink),
        Experiment::Thermometry => thermometry(cfg, &mut sink),
    }
    .map_err(|e| with_context(cfg.experiment, e))?;
    sink.json("results.json", &results)?;
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "config": cfg.to_toml()?,
        "files": sink.files,
        "created_unix": created,
    });
    sink.json("manifest.json", &manifest)?;
    Ok(RunSummary {
        dir: sink.dir,
        files: sink.files,
        results,
    })
}

fn with_context(experiment: Experiment, e: Error) -> Error {
    Error::Context {
        context: format!("experiment `{experiment}`"),
        source: Box::new(e),
    }
}

fn herald(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    let h = cfg.herald();
    let p_b = h.p_b.unwrap_or(cfg.device.p_b);
    let rho = heralded_phonon_state(p_b, h.n_init, h.dim)?;
    let stats = rho.mode_stats(0)?;
    sink.csv(
        "populations.csv",
        &["n", "population"],
        stats
            .probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| vec![n as f64, *p]),
    )?;
    let g2_zero = if h.n_init > 0.0 {
        Some(g2_om_model(0.0, cfg.device.gamma_m, |_| Ok(h.n_init))?)
    } else {
        None
    };
    Ok(json!({
        "p_b": p_b,
        "n_init": h.n_init,
        "dim": h.dim,
        "mean_phonons": stats.mean,
        "single_phonon_weight": stats.probabilities[1],
        "stokes_mean_photons": stokes_mean_photons(p_b, h.n_init, h.dim)?,
        "purity": rho.purity(),
        "g2_om_zero_delay": g2_zero,
    }))
}

struct OperatingPoint {
    ratio: f64,
    n: f64,
    mean: f64,
    beta: f64,
    visibility: f64,
    herald_probability: f64,
}

fn operating_point(cfg: &ScenarioConfig, ratio: f64) -> Result<OperatingPoint> {
    let s = cfg.superposition();
    let herald = HeraldConfig {
        p_b: cfg.device.p_b,
        n_init: s.n_init,
        dim: s.dim,
        mixing_angle: s.mixing_angle,
        ..HeraldConfig::default()
    }
    .with_ratio(ratio)?;
    let sup = prepare_superposition(&herald)?;
    let mean = sup.state.mode_stats(0)?.mean;
    let beta = s.beta.unwrap_or(mean.sqrt());
    let visibility = readout_visibility(
        &sup.state,
        C64::new(beta, 0.0),
        s.setup_visibility,
        s.phase_steps,
    )?;
    Ok(OperatingPoint {
        ratio,
        n: sup.single_phonon_weight,
        mean,
        beta,
        visibility,
        herald_probability: sup.herald_probability,
    })
}

fn superposition(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    let s = cfg.superposition();
    let mut rows = Vec::new();
    for &r in &s.sweep_ratios {
        let p = operating_point(cfg, r)?;
        rows.push(vec![p.ratio, p.n, p.mean, p.beta, p.visibility]);
    }
    sink.csv(
        "visibility_sweep.csv",
        &[
            "ratio",
            "single_phonon_weight",
            "mean_phonons",
            "beta",
            "visibility",
        ],
        rows,
    )?;
    let p = operating_point(cfg, s.ratio)?;
    Ok(json!({
        "ratio": p.ratio,
        "n_init": s.n_init,
        "single_phonon_weight": p.n,
        "mean_phonons": p.mean,
        "beta": p.beta,
        "setup_visibility": s.setup_visibility,
        "visibility": p.visibility,
        "herald_probability": p.herald_probability,
        "mixing_angle": s.mixing_angle,
    }))
}

fn visibility_decay(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    let v = cfg.visibility_decay();
    let v0 = match v.v0 {
        Some(v0) => v0,
        None => operating_point(cfg, cfg.superposition().ratio)?.visibility,
    };
    let t2 = tls_tau_steady(v.n_c_avg, &cfg.tls().params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, v.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let model: Vec<f64> = v.delays.iter().map(|t| v0 * (-t / t2).exp()).collect();
    let sim: Vec<f64> = model.iter().map(|m| m + noise.sample(&mut rng)).collect();
    let ws = vec![1.0 / (v.noise_sd * v.noise_sd); sim.len()];
    let guess = [v0, t2];
    let fit = fit_model(FitModel::Exponential, &v.delays, &sim, &ws, &guess)?;
    sink.csv(
        "visibility_decay.csv",
        &["delay_s", "visibility_model", "visibility_sim", "sd"],
        v.delays
            .iter()
            .zip(&model)
            .zip(&sim)
            .map(|((t, m), s)| vec![*t, *m, *s, v.noise_sd]),
    )?;
    Ok(json!({
        "v0": v0,
        "t2_model_s": t2,
        "t2_fit_s": fit.params[1],
        "t2_sd_s": fit.sds[1],
        "fit": fit.to_json(),
    }))
}

fn g2_decay(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    let g = cfg.g2_decay();
    let profile = match &g.occupation {
        None => default_occupation_profile()?,
        Some(OccupationSource::Csv { csv }) => OccupationProfile::from_csv_path(csv)?,
        Some(OccupationSource::Profile(p)) => p.clone(),
    };
    let gamma = g.gamma_m.unwrap_or(cfg.device.gamma_m);
    let ratio = (g.t_max / g.t_min).powf(1.0 / (g.points - 1) as f64);
    let mut rows = Vec::with_capacity(g.points);
    for i in 0..g.points {
        let t = g.t_min * ratio.powi(i as i32);
        let value = g2_om_model(t, gamma, |d| thermal_occupation(&profile, d))?;
        rows.push(vec![t, value, classical_bound(), bell_bound()]);
    }
    sink.csv(
        "g2_decay.csv",
        &["delay_s", "g2", "classical_bound", "bell_bound"],
        rows,
    )?;
    let classical = g2_crossing(classical_bound(), gamma, &profile, g.t_min, g.t_max)?;
    let bell = g2_crossing(bell_bound(), gamma, &profile, g.t_min, g.t_max)?;
    Ok(json!({
        "gamma_m": gamma,
        "t1_s": 1.0 / gamma,
        "classical_crossing_s": classical,
        "bell_crossing_s": bell,
    }))
}

fn click_pipeline(cfg: &ScenarioConfig, sink: &mut Sink, bunching: bool) -> Result<Value> {
    let scn = cfg.cw()?;
    let a = cfg.analysis();
    let clicks = simulate_clicks(&scn, &cfg.detection)?;
    if a.write_clicks {
        write_clicks_path(&clicks, sink.dir.join("clicks.csv"))?;
        sink.files.push("clicks.csv".into());
    }
    let hist = successive_diff_histogram(&clicks, a.bin_width, a.max_delay)?;
    write_histogram(&hist, fs::File::create(sink.dir.join("histogram.csv"))?)?;
    sink.files.push("histogram.csv".into());
    let count_rate = clicks.len() as f64 / scn.duration;
    let fast = a
        .fast_timescale_guess
        .unwrap_or(if scn.coherence_tau.is_finite() {
            scn.coherence_tau / 2.0
        } else {
            10e-6
        });
    let detuning = scn.delta_omega.abs();
    let opts = BackgroundOptions {
        fast_timescale_guess: fast,
        detuning_hz: (!bunching).then_some(detuning),
        remove_fast: !bunching,
    };
    let series = correct_background(&hist, count_rate, &opts)?;
    sink.csv(
        "corrected.csv",
        &["delay_s", "c2", "sd"],
        series
            .delays
            .iter()
            .zip(&series.values)
            .zip(&series.sds)
            .map(|((x, v), s)| vec![*x, *v, *s]),
    )?;
    let kind = if bunching {
        DecayKind::Plain
    } else {
        DecayKind::Sinusoid {
            detuning_hz: detuning,
            free_period: a.free_period,
        }
    };
    let d = extract_decay(&series, kind)?;
    let mut out = json!({
        "clicks": clicks.len(),
        "count_rate_hz": count_rate,
        "injected_coherence_tau_s": if scn.coherence_tau.is_finite() { Some(scn.coherence_tau) } else { None },
        "tau_s": d.tau,
        "tau_sd_s": d.sd,
        "slow_fit": series.slow.to_json(),
        "fast_fit": series.fast.as_ref().map(|f| f.to_json()),
        "decay_fit": d.fit.to_json(),
    });
    if bunching {
        let (g2, sd) = d.g2_zero().unwrap_or((f64::NAN, f64::NAN));
        out["g2_zero"] = json!(g2);
        out["g2_zero_sd"] = json!(sd);
        out["gamma_bunch_fit"] = json!(1.0 / d.tau);
        out["gamma_bunch_injected"] = json!(2.0 / scn.coherence_tau);
    } else if let Some((p, sd)) = d.period() {
        out["period_s"] = json!(p);
        out["period_sd_s"] = json!(sd);
    }
    Ok(out)
}

fn cw_coherence(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    click_pipeline(cfg, sink, false)
}

fn bunching(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    click_pipeline(cfg, sink, true)
}

fn tls_sweep(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    let t = cfg.tls();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(1.0, t.relative_noise).map_err(|e| Error::Config(e.to_string()))?;
    let model = t
        .n_c
        .iter()
        .map(|n| tls_tau_steady(*n, &t.params))
        .collect::<Result<Vec<_>>>()?;
    let sim: Vec<f64> = model.iter().map(|m| m * noise.sample(&mut rng)).collect();
    sink.csv(
        "tls_sweep.csv",
        &["n_c", "tau_model_s", "tau_sim_s"],
        t.n_c
            .iter()
            .zip(&model)
            .zip(&sim)
            .map(|((n, m), s)| vec![*n, *m, *s]),
    )?;
    let fit = if t.relative_noise > 0.0 {
        let ws: Vec<f64> = model
            .iter()
            .map(|m| 1.0 / (t.relative_noise * m).powi(2))
            .collect();
        fit_model(
            FitModel::TlsSaturation,
            &t.n_c,
            &sim,
            &ws,
            &initial_guess(FitModel::TlsSaturation, &t.n_c, &sim)?,
        )?
    } else {
        fit_auto(FitModel::TlsSaturation, &t.n_c, &sim, &vec![1.0; sim.len()])?
    };
    Ok(json!({
        "params": t.params,
        "tau_min_fit_s": fit.params[0],
        "tau_min_sd_s": fit.sds[0],
        "tau_max_fit_s": fit.params[1],
        "tau_max_sd_s": fit.sds[1],
        "fit": fit.to_json(),
    }))
}

fn thermometry(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<Value> {
    let t = cfg.thermometry();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for &n in &t.n_therm {
        let mean_as = t.stokes_counts * n / (n + 1.0);
        let s = Poisson::new(t.stokes_counts)
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(&mut rng);
        let a = if mean_as > 0.0 {
            Poisson::new(mean_as)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(&mut rng)
        } else {
            0.0
        };
        let est = sideband_asymmetry_occupancy(s, a)?;
        let sd = ((s * s * a + a * a * s) / (s - a).powi(4)).sqrt();
        rows.push(vec![n, s, a, est, sd]);
        estimates.push(json!({ "n_true": n, "n_est": est, "sd": sd }));
    }
    sink.csv(
        "thermometry.csv",
        &[
            "n_true",
            "stokes_counts",
            "antistokes_counts",
            "n_est",
            "sd",
        ],
        rows,
    )?;
    Ok(json!({ "points": estimates }))
}
