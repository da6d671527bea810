//! Goodness-of-fit of Monte-Carlo samples against their Gaussian limits.

mod gauss;
mod plots;

pub use gauss::{
    independence_check, joint_gauss_fit, ks_to_gaussian, ks_two_sample, wasserstein1_to_gaussian, GaussFitReport,
    IndependenceReport, JointFitOptions, KsTest, Level, TwoSampleKs,
};
pub use plots::{histogram, qq_points, write_histogram_csv, write_qq_csv, Bin};

use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample variance, from the fourth central moment.
pub fn variance_stderr(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).max(0.0).sqrt()
}

pub(crate) fn check_len(xs: &[f64], min: usize, what: &str) -> Result<()> {
    if xs.len() < min {
        return Err(Error::invalid(format!("{what} needs at least {min} samples, got {}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what}: samples must be finite")));
    }
    Ok(())
}

pub(crate) fn check_target(v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("target variance must be positive, got {v}")));
    }
    Ok(())
}
