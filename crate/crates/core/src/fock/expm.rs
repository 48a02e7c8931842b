//! Matrix exponential by scaling and squaring around a Taylor series.
//!
//! The operators exponentiated here are small (a few hundred rows at most)
//! anti-Hermitian generators, so a plain Taylor series on a matrix scaled down
//! to unit-ish norm converges quickly and stays well conditioned.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Scaled matrices have a 1-norm at most this large before the series starts.
const SCALED_NORM: f64 = 0.5;
const MAX_TERMS: usize = 60;

pub fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` for a square complex matrix.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a * C64::new(0.5f64.powi(squarings as i32), 0.0);

    let mut sum = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=MAX_TERMS {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
        if one_norm(&term) <= f64::EPSILON * 1e-2 * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}
