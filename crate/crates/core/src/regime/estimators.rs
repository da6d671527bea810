use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::controls::ConvSampler;
use super::{check_increasing, CurvePoint, Dims, Estimate, FourCross, MomentCurve, Projection};
use crate::par;
use crate::rng::{RngSeed, SimRng};
use crate::stats::{ks_two_sample, Level, TwoSampleKs};
use crate::weights::{ConvWeights, LayerWeights, WeightSampler};
use crate::{Error, Result};

/// Number of groups in the median-of-means drift check.
const DRIFT_GROUPS: usize = 20;

/// Where draws come from: an `m x n` matrix law or a `c_out x c_in x k x k`
/// kernel law (viewed through its unfolded `c_out x k^2 c_in` matrix).
#[derive(Clone, Copy)]
pub(crate) enum Source<'a> {
    Matrix { sampler: &'a dyn WeightSampler, m: usize, n: usize },
    Conv { sampler: &'a dyn ConvSampler, c_out: usize, c_in: usize, k: usize },
}

enum Draw {
    Matrix(LayerWeights),
    Conv(ConvWeights),
}

impl Draw {
    fn row(&self, i: usize) -> Vec<f64> {
        match self {
            Draw::Matrix(w) => w.row(i),
            Draw::Conv(u) => u.unfolded_row(i),
        }
    }

    fn column(&self, c: usize) -> Vec<f64> {
        match self {
            Draw::Matrix(w) => w.column(c),
            Draw::Conv(u) => u.unfolded_column(c),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Draw::Matrix(w) => w.apply(x),
            Draw::Conv(u) => u.apply_patches(&DMatrix::from_column_slice(x.len(), 1, x)).as_slice().to_vec(),
        }
    }
}

impl<'a> Source<'a> {
    pub(crate) fn is_conv(&self) -> bool {
        matches!(self, Source::Conv { .. })
    }

    pub(crate) fn sigma_w2(&self) -> f64 {
        match self {
            Source::Matrix { sampler, .. } => sampler.sigma_w2(),
            Source::Conv { sampler, .. } => sampler.sigma_w2(),
        }
    }

    pub(crate) fn label(&self) -> String {
        match self {
            Source::Matrix { sampler, .. } => sampler.label(),
            Source::Conv { sampler, .. } => sampler.label(),
        }
    }

    pub(crate) fn dims(&self) -> Dims {
        match *self {
            Source::Matrix { m, n, .. } => Dims { rows: m, cols: n, fan_in: n },
            Source::Conv { c_out, c_in, k, .. } => Dims { rows: c_out, cols: k * k * c_in, fan_in: c_in },
        }
    }

    /// Column stride between consecutive input channels.
    fn block(&self) -> usize {
        match *self {
            Source::Matrix { .. } => 1,
            Source::Conv { k, .. } => k * k,
        }
    }

    fn check(&self) -> Result<()> {
        let d = self.dims();
        if d.rows < 4 || d.fan_in < 2 {
            return Err(Error::invalid(format!(
                "regime checks need at least 4 rows and fan-in 2, got {}x{} (fan-in {})",
                d.rows, d.cols, d.fan_in
            )));
        }
        if let Source::Conv { k, .. } = *self {
            if k < 3 || k % 2 == 0 {
                return Err(Error::invalid(format!("kernel size must be odd and at least 3, got {k}")));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut SimRng) -> Result<Draw> {
        match *self {
            Source::Matrix { sampler, m, n } => sampler.sample(m, n, rng).map(Draw::Matrix),
            Source::Conv { sampler, c_out, c_in, k } => sampler.sample(c_out, c_in, k, rng).map(Draw::Conv),
        }
    }

    /// Columns of input channel `ch`: one for a matrix, taps 0 and 1 for a
    /// kernel.
    fn channel(&self, d: &Draw, ch: usize) -> Vec<Vec<f64>> {
        let b = self.block();
        if self.is_conv() {
            vec![d.column(ch * b), d.column(ch * b + 1)]
        } else {
            vec![d.column(ch)]
        }
    }

    pub(crate) fn second_names(&self) -> Vec<&'static str> {
        let mut v = vec!["variance", "mean", "same_row", "same_column", "off_diagonal"];
        if self.is_conv() {
            v.push("same_filter");
        }
        v
    }
}

pub(crate) struct TrialStats {
    /// Normalised second-moment statistics, ordered as `second_names`.
    pub second: Vec<f64>,
    pub eighth: f64,
    pub cross: Vec<f64>,
    /// Entry, row norm and column norm at a fixed or a random position.
    pub exch: Option<[f64; 3]>,
}

pub(crate) struct TrialOptions<'p> {
    pub projection: Projection,
    pub patterns: &'p [FourCross],
    pub exchangeability: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Round to 10 significant digits so that round-off in exactly equal
/// statistics (unit row norms of orthogonal draws) does not split KS ties.
fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = 10f64.powi(x.abs().log10().floor() as i32 - 9);
    (x / e).round() * e
}

/// Mean over cyclic row shifts of `f(i)`.
fn shift_mean(m: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..m).map(f).sum::<f64>() / m as f64
}

fn one_trial(src: &Source, t: usize, trials: usize, seed: &RngSeed, opts: &TrialOptions) -> Result<TrialStats> {
    let dims = src.dims();
    let mut rng = seed.children(&[dims.rows as u64, dims.cols as u64, t as u64]).rng();
    let d = src.draw(&mut rng)?;
    let m = dims.rows;
    let n = dims.fan_in as f64;
    let s2 = src.sigma_w2();
    let c0 = src.channel(&d, 0);
    let c1 = src.channel(&d, 1);
    let (a, b) = (&c0[0], &c1[0]);
    let nx = |i: usize| (i + 1) % m;

    let mut second = vec![
        n / s2 * shift_mean(m, |i| a[i] * a[i]),
        (n / s2).sqrt() * shift_mean(m, |i| a[i]),
        n / s2 * shift_mean(m, |i| a[i] * b[i]),
        n / s2 * shift_mean(m, |i| a[i] * a[nx(i)]),
        n / s2 * shift_mean(m, |i| a[i] * b[nx(i)]),
    ];
    if src.is_conv() {
        second.push(n / s2 * shift_mean(m, |i| a[i] * c0[1][i]));
    }

    let dir = opts.projection.vector(dims.fan_in);
    let block = src.block();
    let mut spread = vec![0.0; dims.cols];
    for (j, aj) in dir.iter().enumerate() {
        spread[j * block] = *aj;
    }
    let dir_norm2: f64 = dir.iter().map(|x| x * x).sum();
    // Rows are exchangeable, so every row projection estimates the same moment.
    let eighth = shift_mean(m, {
        let proj = d.apply(&spread);
        move |i| n.powi(4) * (proj[i] * proj[i] / dir_norm2).powi(4)
    });

    let cross = opts
        .patterns
        .iter()
        .map(|p| {
            let [ra, rb, rc, rd] = p.rows;
            let [pa, pb, pc, pd] = p.pixels;
            let v = shift_mean(m, |i| {
                c0[pa][(i + ra) % m] * c0[pb][(i + rb) % m] * c1[pc][(i + rc) % m] * c1[pd][(i + rd) % m]
            });
            n * n / (s2 * s2) * v
        })
        .collect();

    let exch = if opts.exchangeability {
        if t < trials / 2 {
            Some([a[0], norm(&d.row(0)), norm(a)].map(quantize))
        } else {
            let r = rng.random_range(0..m);
            let c = block * rng.random_range(0..dims.fan_in);
            let row = d.row(r);
            let col = d.column(c);
            Some([row[c], norm(&row), norm(&col)].map(quantize))
        }
    } else {
        None
    };

    Ok(TrialStats { second, eighth, cross, exch })
}

pub(crate) fn run_trials(src: &Source, trials: usize, seed: &RngSeed, opts: &TrialOptions) -> Result<Vec<TrialStats>> {
    src.check()?;
    for p in opts.patterns {
        p.check(src.is_conv())?;
    }
    par::try_map_indexed(trials, |t| one_trial(src, t, trials, seed, opts))
}

pub(crate) fn column<T>(stats: &[TrialStats], f: impl Fn(&TrialStats) -> T) -> Vec<T> {
    stats.iter().map(f).collect()
}

/// Median-of-means drift check: the overall mean of a well-behaved positive
/// statistic agrees with the median of its group means.
pub(crate) fn drifts(xs: &[f64]) -> bool {
    let g = xs.len() / DRIFT_GROUPS;
    if g == 0 {
        return false;
    }
    let mut means: Vec<f64> = xs.chunks_exact(g).take(DRIFT_GROUPS).map(|c| c.iter().sum::<f64>() / g as f64).collect();
    means.sort_by(f64::total_cmp);
    let median = 0.5 * (means[DRIFT_GROUPS / 2 - 1] + means[DRIFT_GROUPS / 2]);
    let mean = Estimate::from_samples(xs).estimate;
    !mean.is_finite() || (mean - median).abs() > 0.5 * median.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub value: Estimate,
}

/// Normalised second moments of an `n x n` draw: `n / sigma^2 E[W^2]`
/// (target 1), `sqrt(n) / sigma E[W]` (target 0) and cross products of
/// distinct entries (target 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    pub n: usize,
    pub trials: usize,
    pub variance: Estimate,
    pub mean: Estimate,
    pub cross: Vec<NamedEstimate>,
    pub max_abs_cross: f64,
    /// False when the variance statistic fails the median-of-means check.
    pub convergent: bool,
}

pub(crate) fn second_moments(src: &Source, stats: &[TrialStats], trials: usize) -> SecondMoments {
    let names = src.second_names();
    let col = |k: usize| column(stats, |s| s.second[k]);
    let var = col(0);
    let cross: Vec<NamedEstimate> = (2..names.len())
        .map(|k| NamedEstimate { name: names[k].to_string(), value: Estimate::from_samples(&col(k)) })
        .collect();
    SecondMoments {
        n: src.dims().fan_in,
        trials,
        variance: Estimate::from_samples(&var),
        mean: Estimate::from_samples(&col(1)),
        max_abs_cross: cross.iter().map(|c| c.value.estimate.abs()).fold(0.0, f64::max),
        cross,
        convergent: !drifts(&var),
    }
}

pub fn estimate_second_moments(sampler: &dyn WeightSampler, n: usize, trials: usize, seed: &RngSeed) -> Result<SecondMoments> {
    if trials < 100 {
        return Err(Error::invalid(format!("second-moment estimates need at least 100 trials, got {trials}")));
    }
    let src = Source::Matrix { sampler, m: n, n };
    let opts = TrialOptions { projection: Projection::Ones, patterns: &[], exchangeability: false };
    let stats = run_trials(&src, trials, seed, &opts)?;
    Ok(second_moments(&src, &stats, trials))
}

pub(crate) fn curve_point(src: &Source, stats: &[TrialStats]) -> CurvePoint {
    let e = Estimate::from_samples(&column(stats, |s| s.eighth));
    CurvePoint { n: src.dims().fan_in, estimate: e.estimate, stderr: e.stderr }
}

/// Projected eighth moment of the first row of square `n x n` draws for
/// each `n` in `n_list`.
pub fn condition_iii_curve(
    sampler: &dyn WeightSampler,
    projection: Projection,
    n_list: &[usize],
    trials: usize,
    seed: &RngSeed,
) -> Result<MomentCurve> {
    check_increasing(n_list, "n_list")?;
    let opts = TrialOptions { projection, patterns: &[], exchangeability: false };
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let src = Source::Matrix { sampler, m: n, n };
        let stats = run_trials(&src, trials, seed, &opts)?;
        points.push(curve_point(&src, &stats));
    }
    Ok(MomentCurve { label: sampler.label(), projection, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourCrossRow {
    pub pattern: String,
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
}

pub(crate) fn four_cross_rows(src: &Source, stats: &[TrialStats], patterns: &[FourCross]) -> Vec<FourCrossRow> {
    patterns
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let e = Estimate::from_samples(&column(stats, |s| s.cross[k]));
            FourCrossRow {
                pattern: p.name.clone(),
                n: src.dims().fan_in,
                estimate: e.estimate,
                stderr: e.stderr,
                target: p.target(),
            }
        })
        .collect()
}

/// `n^2 / sigma^4` times the four-cross moments of square draws.
pub fn condition_iv_estimate(
    sampler: &dyn WeightSampler,
    n_list: &[usize],
    trials: usize,
    seed: &RngSeed,
    patterns: &[FourCross],
) -> Result<Vec<FourCrossRow>> {
    check_increasing(n_list, "n_list")?;
    let opts = TrialOptions { projection: Projection::Ones, patterns, exchangeability: false };
    let mut rows = Vec::new();
    for &n in n_list {
        let src = Source::Matrix { sampler, m: n, n };
        let stats = run_trials(&src, trials, seed, &opts)?;
        rows.extend(four_cross_rows(&src, &stats, patterns));
    }
    Ok(rows)
}

/// Exact four-cross moments of an `n x n` Haar orthogonal matrix:
/// `E[O_11^2 O_12^2]` and `E[O_11^2 O_22^2]`.
pub fn haar_four_cross(n: usize) -> (f64, f64) {
    let n = n as f64;
    (1.0 / (n * (n + 2.0)), (n + 1.0) / ((n - 1.0) * n * (n + 2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeabilityReport {
    pub n: usize,
    pub tests: Vec<(String, TwoSampleKs)>,
    pub pass: bool,
}

pub(crate) const EXCH_NAMES: [&str; 3] = ["entry", "row_norm", "column_norm"];

pub(crate) fn exchangeability(src: &Source, stats: &[TrialStats]) -> Result<ExchangeabilityReport> {
    let half = stats.len() / 2;
    let mut tests = Vec::new();
    for (k, name) in EXCH_NAMES.iter().enumerate() {
        let get = |s: &TrialStats| s.exch.expect("exchangeability statistics requested")[k];
        let fixed = column(&stats[..half], get);
        let moved = column(&stats[half..], get);
        tests.push((name.to_string(), ks_two_sample(&fixed, &moved, Level::One)?));
    }
    let pass = tests.iter().all(|(_, t)| t.pass);
    Ok(ExchangeabilityReport { n: src.dims().fan_in, tests, pass })
}

/// Two-sample KS at the 1% level between statistics at a fixed position and
/// at a uniformly permuted position (fresh row and column).
pub fn exchangeability_test(sampler: &dyn WeightSampler, n: usize, trials: usize, seed: &RngSeed) -> Result<ExchangeabilityReport> {
    if trials < 1000 {
        return Err(Error::invalid(format!("exchangeability test needs at least 1000 trials, got {trials}")));
    }
    let src = Source::Matrix { sampler, m: n, n };
    let opts = TrialOptions { projection: Projection::Ones, patterns: &[], exchangeability: true };
    let stats = run_trials(&src, trials, seed, &opts)?;
    exchangeability(&src, &stats)
}
