//! Monte-Carlo checks of the four Pseudo-iid conditions for weight matrices
//! and convolution kernels.
//!
//! Each estimator draws independent layers from a sampler, extracts a few
//! rows and columns per draw and averages per-trial statistics. Verdicts use
//! `|estimate - target| <= max(3 SE, 0.05 |target| + 0.01)`.

mod classify;
mod controls;
mod estimators;

pub use classify::{classify, classify_conv};
pub use controls::{Control, ConvSampler, SharedFilterControl};
pub use estimators::{
    condition_iii_curve, condition_iv_estimate, estimate_second_moments, exchangeability_test,
    haar_four_cross, ExchangeabilityReport, FourCrossRow, NamedEstimate, SecondMoments,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::weights::fmt_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Fail dominates, then inconclusive.
    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Mean with Neumaier-compensated summation and a two-pass variance.
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = compensated_sum(xs.iter().copied()) / n;
        let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
        let stderr = if xs.len() > 1 { (ss / (n - 1.0) / n).sqrt() } else { f64::INFINITY };
        Estimate { estimate: mean, stderr }
    }
}

pub(crate) fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Fixed part of the tolerance band around `target`.
pub fn band(target: f64) -> f64 {
    0.05 * target.abs() + 0.01
}

pub fn tolerance(target: f64, stderr: f64) -> f64 {
    (3.0 * stderr).max(band(target))
}

/// Pass inside the tolerance; inconclusive when it passes only because the
/// standard error is wider than the fixed band.
pub fn judge(estimate: f64, stderr: f64, target: f64) -> Verdict {
    judge_with_band(estimate, stderr, target, band(target))
}

pub(crate) fn judge_with_band(estimate: f64, stderr: f64, target: f64, band: f64) -> Verdict {
    if !estimate.is_finite() || !stderr.is_finite() {
        return Verdict::Fail;
    }
    if (estimate - target).abs() > band.max(3.0 * stderr) {
        Verdict::Fail
    } else if stderr > band {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    }
}

/// One tested quantity of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    /// `"i"`, `"ii"`, `"iii"` or `"iv"`.
    pub condition: String,
    pub name: String,
    /// Fan-in of the layer the record was measured at.
    pub n: usize,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
    /// The `n` of the `sigma^2 / n` normalisation.
    pub fan_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub schema_version: u32,
    pub label: String,
    /// `"matrix"` or `"conv"`.
    pub kind: String,
    pub dims: Vec<Dims>,
    pub trials: usize,
    pub conditions: Vec<ConditionRecord>,
    /// Largest normalised eighth moment seen on the curve.
    pub constant_k_estimate: f64,
    pub curve: MomentCurve,
    pub overall: Verdict,
}

impl RegimeReport {
    /// Combined verdict over all records of `condition`.
    pub fn verdict(&self, condition: &str) -> Option<Verdict> {
        self.conditions
            .iter()
            .filter(|r| r.condition == condition)
            .map(|r| r.verdict)
            .reduce(Verdict::combine)
    }
}

/// Direction `a` of the projected eighth moment `E|sum_j a_j W_1j|^8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    #[default]
    Ones,
    FirstBasis,
    Alternating,
}

impl Projection {
    pub fn vector(self, n: usize) -> Vec<f64> {
        match self {
            Projection::Ones => vec![1.0; n],
            Projection::FirstBasis => (0..n).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
            Projection::Alternating => (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// `n^4 E|sum_j a_j W_1j|^8 / |a|^8` against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub label: String,
    pub projection: Projection,
    pub points: Vec<CurvePoint>,
}

impl MomentCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "estimate", "stderr"])?;
        for p in &self.points {
            w.write_record([p.n.to_string(), fmt_f64(p.estimate), fmt_f64(p.stderr)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Log-log slope between the two largest dimensions, with its standard
    /// error. Estimates the asymptotic growth exponent.
    pub fn tail_slope(&self) -> Option<(f64, f64)> {
        let k = self.points.len().checked_sub(2)?;
        MomentCurve { points: self.points[k..].to_vec(), ..self.clone() }.log_slope()
    }

    /// Weighted least-squares slope of `log estimate` on `log n`, with its
    /// standard error.
    pub fn log_slope(&self) -> Option<(f64, f64)> {
        if self.points.len() < 2 || self.points.iter().any(|p| !(p.estimate > 0.0)) {
            return None;
        }
        let pts: Vec<(f64, f64, f64)> = self
            .points
            .iter()
            .map(|p| {
                let rel = (p.stderr / p.estimate).max(1e-12);
                ((p.n as f64).ln(), p.estimate.ln(), 1.0 / (rel * rel))
            })
            .collect();
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let xbar = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
        let ybar = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar)).sum();
        Some((sxy / sxx, (1.0 / sxx).sqrt()))
    }
}

/// One four-cross moment `E[W_{a,j} W_{b,j} W_{c,j'} W_{d,j'}]`, `j != j'`.
///
/// `rows` are row offsets; `pixels` pick the filter tap `mu` of each factor
/// and must be zero for plain matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourCross {
    pub name: String,
    pub rows: [usize; 4],
    pub pixels: [usize; 4],
}

impl FourCross {
    pub fn new(name: &str, rows: [usize; 4]) -> Self {
        FourCross { name: name.to_string(), rows, pixels: [0; 4] }
    }

    pub fn with_pixels(mut self, pixels: [usize; 4]) -> Self {
        self.pixels = pixels;
        self
    }

    /// Limit of the normalised moment: `d(a,b) d(c,d)` times the same for
    /// the pixel indices.
    pub fn target(&self) -> f64 {
        let [a, b, c, d] = self.rows;
        let [pa, pb, pc, pd] = self.pixels;
        if a == b && c == d && pa == pb && pc == pd {
            1.0
        } else {
            0.0
        }
    }

    pub fn matrix_defaults() -> Vec<FourCross> {
        vec![
            FourCross::new("all_equal", [0, 0, 0, 0]),
            FourCross::new("pairwise_equal", [0, 0, 1, 1]),
            FourCross::new("all_distinct", [0, 1, 2, 3]),
            FourCross::new("mixed", [0, 1, 0, 0]),
        ]
    }

    pub fn conv_defaults() -> Vec<FourCross> {
        let mut v = Self::matrix_defaults();
        v.push(FourCross::new("pixel_pairwise", [0, 0, 1, 1]).with_pixels([0, 0, 1, 1]));
        v.push(FourCross::new("pixel_mismatch", [0, 0, 0, 0]).with_pixels([0, 1, 0, 0]));
        v
    }

    pub(crate) fn check(&self, conv: bool) -> Result<()> {
        if self.rows.iter().any(|&r| r > 3) {
            return Err(Error::invalid(format!("pattern {}: row offsets must be in 0..4", self.name)));
        }
        let max_pixel = if conv { 1 } else { 0 };
        if self.pixels.iter().any(|&p| p > max_pixel) {
            return Err(Error::invalid(format!("pattern {}: pixel indices must be <= {max_pixel}", self.name)));
        }
        Ok(())
    }
}

/// Dimensions and trial count for [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub n_list: Vec<usize>,
    pub trials: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { n_list: vec![32, 64, 128, 256], trials: 20_000 }
    }
}

/// Channel ladder for [`classify_conv`]; `c_in_list[i]` pairs with
/// `c_out_list[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBudget {
    pub k: usize,
    pub c_in_list: Vec<usize>,
    pub c_out_list: Vec<usize>,
    pub trials: usize,
}

impl Default for ConvBudget {
    fn default() -> Self {
        ConvBudget { k: 3, c_in_list: vec![2, 4, 8, 16], c_out_list: vec![36, 72, 144, 288], trials: 20_000 }
    }
}

pub(crate) fn check_increasing(ns: &[usize], what: &str) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{what} must be strictly increasing")));
    }
    Ok(())
}
