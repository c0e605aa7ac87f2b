//! Central-difference gradient verification. Runs in verification precision
//! (f64); the relative error for coordinate i is
//! |analytic_i − numeric_i| / max(|analytic_i|, |numeric_i|, 1).

use super::Tensor4;
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Compares `analytic` (the hand-derived gradient of the scalar `f` at
/// `input`) against central differences over every coordinate; returns the
/// worst relative error.
pub fn finite_difference_check<F>(
    f: F,
    analytic: &Tensor4<f64>,
    input: &Tensor4<f64>,
    epsilon: f64,
) -> Result<f64>
where
    F: Fn(&Tensor4<f64>) -> f64 + Sync,
{
    let coords: Vec<usize> = (0..input.len()).collect();
    finite_difference_check_at(f, analytic, input, epsilon, &coords)
}

/// Same as [`finite_difference_check`] but restricted to the given
/// coordinates — the full autoencoder has millions of parameters, so its
/// suite probes a deterministic subsample instead of every entry.
pub fn finite_difference_check_at<F>(
    f: F,
    analytic: &Tensor4<f64>,
    input: &Tensor4<f64>,
    epsilon: f64,
    coords: &[usize],
) -> Result<f64>
where
    F: Fn(&Tensor4<f64>) -> f64 + Sync,
{
    if epsilon <= 0.0 {
        return Err(Error::invalid(format!(
            "finite_difference_check: epsilon must be > 0, got {epsilon}"
        )));
    }
    if analytic.shape() != input.shape() {
        return Err(Error::shape(
            "finite_difference_check",
            analytic.shape(),
            input.shape(),
        ));
    }
    if let Some(&bad) = coords.iter().find(|&&i| i >= input.len()) {
        return Err(Error::invalid(format!(
            "finite_difference_check: coordinate {bad} out of range (len {})",
            input.len()
        )));
    }

    let worst = coords
        .par_iter()
        .map(|&i| {
            let mut x = input.clone();
            let base = input.data()[i];
            x.data_mut()[i] = base + epsilon;
            let fp = f(&x);
            x.data_mut()[i] = base - epsilon;
            let fm = f(&x);
            let numeric = (fp - fm) / (2.0 * epsilon);
            rel_err(analytic.data()[i], numeric)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
