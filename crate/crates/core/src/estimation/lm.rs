use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::models::{wrap_phase, FitModel};
use crate::error::{ensure, Error, Result};

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-8;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    pub sds: Vec<f64>,
    #[serde(serialize_with = "rows")]
    pub covariance: DMatrix<f64>,
    pub reduced_chi2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted squared residual after each accepted step, starting with the
    /// initial guess.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let names = self.model.param_names();
        let i = names.iter().position(|n| *n == name)?;
        Some((self.params[i], self.sds[i]))
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.model.value(&self.params, x)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

struct Linearization {
    cost: f64,
    jtj: DMatrix<f64>,
    jtr: DVector<f64>,
}

fn linearize(model: &FitModel, p: &[f64], xs: &[f64], ys: &[f64], ws: &[f64]) -> Linearization {
    let k = p.len();
    let mut jtj = DMatrix::zeros(k, k);
    let mut jtr = DVector::zeros(k);
    let mut grad = vec![0.0; k];
    let mut cost = 0.0;
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let r = y - model.eval(p, x, &mut grad);
        cost += w * r * r;
        for a in 0..k {
            jtr[a] += w * grad[a] * r;
            for b in a..k {
                jtj[(a, b)] += w * grad[a] * grad[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            jtj[(a, b)] = jtj[(b, a)];
        }
    }
    Linearization { cost, jtj, jtr }
}

fn cost_of(model: &FitModel, p: &[f64], xs: &[f64], ys: &[f64], ws: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let r = y - model.value(p, x);
            w * r * r
        })
        .sum()
}

/// Weighted damped least squares (Levenberg-Marquardt with diagonal
/// scaling).
///
/// Nonconvergence is reported through `converged`; a singular normal matrix
/// at the solution is an error.
pub fn fit_model(
    model: FitModel,
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
    initial_guess: &[f64],
) -> Result<FitResult> {
    let k = model.param_count();
    if xs.len() != ys.len() || xs.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} xs, {} ys, {} weights",
            xs.len(),
            ys.len(),
            weights.len()
        )));
    }
    if initial_guess.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} initial parameters for a {k}-parameter {} model",
            initial_guess.len(),
            model.name()
        )));
    }
    ensure(
        xs.len() > k,
        "data",
        format!("{} points cannot constrain {k} parameters", xs.len()),
    )?;
    ensure(
        weights.iter().all(|w| w.is_finite() && *w >= 0.0),
        "weights",
        "must be finite and nonnegative",
    )?;
    ensure(
        xs.iter().chain(ys).all(|v| v.is_finite()),
        "data",
        "must be finite",
    )?;
    ensure(
        model.admissible(initial_guess),
        "initial guess",
        format!("{initial_guess:?} outside the {} domain", model.name()),
    )?;

    let mut p = initial_guess.to_vec();
    let mut lin = linearize(&model, &p, xs, ys, weights);
    let mut history = vec![lin.cost];
    let mut lambda = LAMBDA_START;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = lin.jtj.clone();
            for i in 0..k {
                let d = lin.jtj[(i, i)];
                a[(i, i)] += lambda * if d > 0.0 { d } else { 1.0 };
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&lin.jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let small = p
                .iter()
                .zip(step.iter())
                .all(|(v, s)| s.abs() <= STEP_TOLERANCE * v.abs().max(1e-10));
            if model.admissible(&trial) {
                let c = cost_of(&model, &trial, xs, ys, weights);
                if c <= lin.cost {
                    p = trial;
                    lin = linearize(&model, &p, xs, ys, weights);
                    history.push(lin.cost);
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    converged = small;
                    break;
                }
            }
            if small {
                // no admissible decrease even for a negligible step
                converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if converged || !accepted {
            // saturated damping means the cost cannot be lowered further
            converged = converged || lambda > LAMBDA_MAX || lin.cost == 0.0;
            break;
        }
        if lin.cost == 0.0 {
            converged = true;
            break;
        }
    }

    if let Some((amp, phase)) = model.sign_fold() {
        if p[amp] < 0.0 {
            p[amp] = -p[amp];
            p[phase] += std::f64::consts::PI;
            flip(&mut lin.jtj, amp);
        }
        p[phase] = wrap_phase(p[phase]);
    }

    let dof = (xs.len() - k) as f64;
    let reduced_chi2 = lin.cost / dof;
    let inv = lin
        .jtj
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| lin.jtj.clone().try_inverse())
        .ok_or(Error::SingularMatrix)?;
    let mut covariance = inv * reduced_chi2;
    covariance = (&covariance + covariance.transpose()) * 0.5;
    let sds = (0..k).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    if !converged {
        log::warn!("{} fit stopped after {iterations} iterations", model.name());
    }
    Ok(FitResult {
        model,
        params: p,
        sds,
        covariance,
        reduced_chi2,
        converged,
        iterations,
        cost_history: history,
    })
}

fn flip(m: &mut DMatrix<f64>, i: usize) {
    for j in 0..m.nrows() {
        if j != i {
            m[(i, j)] = -m[(i, j)];
            m[(j, i)] = -m[(j, i)];
        }
    }
}
