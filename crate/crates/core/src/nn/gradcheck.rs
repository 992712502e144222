//! Central finite-difference gradient checking.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Floor of the relative-error denominator.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

/// `(f(θ + h·e_i) − f(θ − h·e_i)) / 2h` for every coordinate.
pub fn numeric_gradient<F>(mut f: F, theta: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Compares `analytic` against central differences of `fragment` at `theta`
/// and returns the maximum relative error.
///
/// `fragment` must produce exactly one value (a loss); anything else is a
/// contract error.
pub fn grad_check<F>(mut fragment: F, theta: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if analytic.len() != theta.len() {
        return Err(Error::Contract(format!(
            "analytic gradient has {} entries for {} parameters",
            analytic.len(),
            theta.len()
        )));
    }
    if !(h > 0.0) {
        return Err(Error::Contract(format!("step must be positive, got {h}")));
    }
    let width = fragment(theta).len();
    if width != 1 {
        return Err(Error::Contract(format!(
            "gradient check needs a scalar output, fragment produced {width} values"
        )));
    }
    let numeric = numeric_gradient(|t| fragment(t)[0], theta, h);
    Ok(max_relative_error(analytic, &numeric))
}
