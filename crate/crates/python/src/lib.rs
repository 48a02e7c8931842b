//! Python bindings for the `phonmem` simulator.

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use phonmem::clickstream::{self, CwMode, CwScenario, DetectionChain};
use phonmem::dynamics::{self, OccupationProfile, TlsParams};
use phonmem::estimation::{self, FitModel};
use phonmem::fock::{self, Detector, FockSpace, LeakagePolicy, ModePrep, TwoModeGate};
use phonmem::protocol::{self, DeviceParams, HeraldConfig};
use phonmem::{cli, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::FitFailed(_) | Error::Unstable(_) | Error::Io(_) | Error::Context { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn policy(check_leakage: bool) -> LeakagePolicy {
    if check_leakage {
        LeakagePolicy::default()
    } else {
        LeakagePolicy::Ignore
    }
}

/// Truncated Fock-space density matrix, mode 0 most significant.
#[pyclass(name = "DensityMatrix", module = "phonmem", skip_from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: fock::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    #[staticmethod]
    fn vacuum(dims: Vec<usize>) -> PyResult<Self> {
        let space = FockSpace::new(dims).map_err(py_err)?;
        Ok(Self {
            inner: fock::DensityMatrix::vacuum(space),
        })
    }

    /// Product state from `("vacuum",)`, `("thermal", n)` or
    /// `("coherent", alpha)` entries, one per mode.
    #[staticmethod]
    fn product(dims: Vec<usize>, preps: Vec<(String, Option<C64>)>) -> PyResult<Self> {
        let space = FockSpace::new(dims).map_err(py_err)?;
        let preps = preps
            .into_iter()
            .map(|(kind, value)| match (kind.as_str(), value) {
                ("vacuum", _) => Ok(ModePrep::Vacuum),
                ("thermal", Some(n)) => Ok(ModePrep::Thermal(n.re)),
                ("coherent", Some(a)) => Ok(ModePrep::Coherent(a)),
                _ => Err(PyValueError::new_err(format!(
                    "bad mode preparation `{kind}`"
                ))),
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: fock::build_state(&space, &preps).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_pure(dims: Vec<usize>, amplitudes: Vec<C64>) -> PyResult<Self> {
        let space = FockSpace::new(dims).map_err(py_err)?;
        Ok(Self {
            inner: fock::DensityMatrix::from_pure(space, &amplitudes).map_err(py_err)?,
        })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.space().dims().to_vec()
    }

    fn matrix(&self) -> Vec<Vec<C64>> {
        let m = self.inner.matrix();
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn min_eigenvalue(&self) -> f64 {
        self.inner.min_eigenvalue()
    }

    fn hermiticity_error(&self) -> f64 {
        self.inner.hermiticity_error()
    }

    fn population(&self, occupations: Vec<usize>) -> PyResult<f64> {
        self.inner.population(&occupations).map_err(py_err)
    }

    #[pyo3(signature = (modes, p_b, phase=0.0, check_leakage=true))]
    fn squeeze(
        &self,
        modes: (usize, usize),
        p_b: f64,
        phase: f64,
        check_leakage: bool,
    ) -> PyResult<Self> {
        let gate = TwoModeGate::Squeeze { p_b, phase };
        let inner = self
            .inner
            .apply_gate(gate, modes, policy(check_leakage))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (modes, angle=std::f64::consts::FRAC_PI_4, phase=0.0, check_leakage=true))]
    fn beamsplitter(
        &self,
        modes: (usize, usize),
        angle: f64,
        phase: f64,
        check_leakage: bool,
    ) -> PyResult<Self> {
        let gate = TwoModeGate::BeamSplitter { angle, phase };
        let inner = self
            .inner
            .apply_gate(gate, modes, policy(check_leakage))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Projects `mode` onto Fock state `fock`, or onto a click when `fock`
    /// is `None`. Returns the renormalized state and the probability.
    #[pyo3(signature = (mode, fock=Some(1)))]
    fn project(&self, mode: usize, fock: Option<usize>) -> PyResult<(Self, f64)> {
        let detector = fock.map_or(Detector::Click, Detector::Fock);
        let (inner, p) = self.inner.project(mode, detector).map_err(py_err)?;
        Ok((Self { inner }, p))
    }

    fn partial_trace(&self, keep: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.partial_trace(&keep).map_err(py_err)?,
        })
    }

    /// `(mean, probabilities)` of one mode.
    fn mode_stats(&self, mode: usize) -> PyResult<(f64, Vec<f64>)> {
        let s = self.inner.mode_stats(mode).map_err(py_err)?;
        Ok((s.mean, s.probabilities))
    }

    fn __repr__(&self) -> String {
        format!(
            "DensityMatrix(dims={:?}, trace={:.6})",
            self.inner.space().dims(),
            self.inner.trace()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (p_b, n_init=0.0, dim=6))]
fn heralded_phonon_state(p_b: f64, n_init: f64, dim: usize) -> PyResult<PyDensityMatrix> {
    Ok(PyDensityMatrix {
        inner: protocol::heralded_phonon_state(p_b, n_init, dim).map_err(py_err)?,
    })
}

/// Returns `(state, herald_probability, single_phonon_weight)`.
#[pyfunction]
#[pyo3(signature = (ratio, n_init=0.0, p_b=0.002, dim=6, mixing_angle=std::f64::consts::FRAC_PI_4))]
fn prepare_superposition(
    ratio: f64,
    n_init: f64,
    p_b: f64,
    dim: usize,
    mixing_angle: f64,
) -> PyResult<(PyDensityMatrix, f64, f64)> {
    let cfg = HeraldConfig {
        p_b,
        n_init,
        dim,
        mixing_angle,
        ..HeraldConfig::default()
    }
    .with_ratio(ratio)
    .map_err(py_err)?;
    let s = protocol::prepare_superposition(&cfg).map_err(py_err)?;
    Ok((
        PyDensityMatrix { inner: s.state },
        s.herald_probability,
        s.single_phonon_weight,
    ))
}

#[pyfunction]
#[pyo3(signature = (state, beta, setup_visibility=0.95, phase_steps=16))]
fn readout_visibility(
    state: &PyDensityMatrix,
    beta: C64,
    setup_visibility: f64,
    phase_steps: usize,
) -> PyResult<f64> {
    protocol::readout_visibility(&state.inner, beta, setup_visibility, phase_steps).map_err(py_err)
}

/// `g2_om` at each delay for a `(delay, occupation)` table.
#[pyfunction]
fn g2_om_curve(delays: Vec<f64>, gamma_m: f64, table: Vec<(f64, f64)>) -> PyResult<Vec<f64>> {
    let profile = OccupationProfile::table(table).map_err(py_err)?;
    delays
        .iter()
        .map(|&t| protocol::g2_om_model(t, gamma_m, |d| dynamics::thermal_occupation(&profile, d)))
        .collect::<phonmem::Result<Vec<_>>>()
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (threshold, gamma_m, table, t_min=1e-6, t_max=20e-3))]
fn g2_crossing(
    threshold: f64,
    gamma_m: f64,
    table: Vec<(f64, f64)>,
    t_min: f64,
    t_max: f64,
) -> PyResult<Option<f64>> {
    let profile = OccupationProfile::table(table).map_err(py_err)?;
    protocol::g2_crossing(threshold, gamma_m, &profile, t_min, t_max).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (n_c, tau_min=16e-6, tau_max=112e-6, rate_ratio=1.0))]
fn tls_tau_steady(n_c: f64, tau_min: f64, tau_max: f64, rate_ratio: f64) -> PyResult<f64> {
    dynamics::tls_tau_steady(
        n_c,
        &TlsParams {
            tau_min,
            tau_max,
            rate_ratio,
        },
    )
    .map_err(py_err)
}

/// Optomechanical damping rate (1/s) for the default device.
#[pyfunction]
fn gamma_opt(n_c: f64) -> PyResult<f64> {
    dynamics::gamma_opt(n_c, &DeviceParams::REFERENCE).map_err(py_err)
}

/// Weighted fit; `model` is the JSON form of a model, e.g.
/// `{"kind": "exponential"}`. Returns the fit result as JSON text.
#[pyfunction]
#[pyo3(signature = (model, xs, ys, weights, initial_guess=None))]
fn fit_model(
    model: &str,
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
    initial_guess: Option<Vec<f64>>,
) -> PyResult<String> {
    let model: FitModel =
        serde_json::from_str(model).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let guess = match initial_guess {
        Some(g) => g,
        None => estimation::initial_guess(model, &xs, &ys).map_err(py_err)?,
    };
    let fit = estimation::fit_model(model, &xs, &ys, &weights, &guess).map_err(py_err)?;
    Ok(fit.to_json().to_string())
}

/// Click timestamps (s) and detector ids for an ideal chain with `lines`
/// detectors.
#[pyfunction]
#[pyo3(signature = (mode="interference", coherence_tau=16e-6, delta_omega=100e3, target_count_rate=500.0, duration=10.0, seed=0, probe_ratio=1.0, jitter_fwhm=0.0, lines=2))]
#[allow(clippy::too_many_arguments)]
fn simulate_clicks(
    mode: &str,
    coherence_tau: f64,
    delta_omega: f64,
    target_count_rate: f64,
    duration: f64,
    seed: u64,
    probe_ratio: f64,
    jitter_fwhm: f64,
    lines: usize,
) -> PyResult<(Vec<f64>, Vec<u32>)> {
    let mode = match mode {
        "interference" => CwMode::Interference,
        "bunching" => CwMode::Bunching,
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    let scn = CwScenario {
        mode,
        coherence_tau,
        delta_omega,
        target_count_rate,
        duration,
        seed,
        probe_ratio,
        jitter_fwhm,
        ..CwScenario::default()
    };
    let clicks =
        clickstream::simulate_clicks(&scn, &DetectionChain::ideal(lines)).map_err(py_err)?;
    Ok(clicks.iter().map(|c| (c.timestamp, c.detector_id)).unzip())
}

/// Successive-delay histogram counts for sorted timestamps.
#[pyfunction]
fn successive_diff_histogram(
    timestamps: Vec<f64>,
    bin_width: f64,
    max_delay: f64,
) -> PyResult<Vec<f64>> {
    let clicks: Vec<_> = timestamps
        .into_iter()
        .map(|timestamp| clickstream::ClickRecord {
            detector_id: 0,
            timestamp,
        })
        .collect();
    Ok(
        clickstream::successive_diff_histogram(&clicks, bin_width, max_delay)
            .map_err(py_err)?
            .counts,
    )
}

/// Validates a TOML scenario and returns its normalized form.
#[pyfunction]
fn validate_config(text: &str) -> PyResult<String> {
    let cfg = cli::parse_config(text).map_err(py_err)?;
    cli::emit_config(&cfg).map_err(py_err)
}

/// Runs a TOML scenario into `output_dir` and returns `results.json` text.
#[pyfunction]
fn run_config(text: &str, output_dir: &str) -> PyResult<String> {
    let cfg = cli::parse_config(text).map_err(py_err)?;
    let summary = cli::run_scenario(&cfg, std::path::Path::new(output_dir)).map_err(py_err)?;
    Ok(summary.results.to_string())
}

#[pymodule]
#[pyo3(name = "phonmem")]
fn phonmem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_function(wrap_pyfunction!(heralded_phonon_state, m)?)?;
    m.add_function(wrap_pyfunction!(prepare_superposition, m)?)?;
    m.add_function(wrap_pyfunction!(readout_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(g2_om_curve, m)?)?;
    m.add_function(wrap_pyfunction!(g2_crossing, m)?)?;
    m.add_function(wrap_pyfunction!(tls_tau_steady, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_opt, m)?)?;
    m.add_function(wrap_pyfunction!(fit_model, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_clicks, m)?)?;
    m.add_function(wrap_pyfunction!(successive_diff_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("CLASSICAL_BOUND", protocol::CLASSICAL_BOUND)?;
    m.add("BELL_BOUND", protocol::BELL_BOUND)?;
    Ok(())
}
