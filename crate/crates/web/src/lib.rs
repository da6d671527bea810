//! WebAssembly bindings for the demo page in `www/`. Every export takes
//! plain numbers and strings and returns a JSON string; the `*_report`
//! functions behind them are ordinary Rust and are tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use pseudoiid::analysis::{eoc_solve, EocOptions};
use pseudoiid::kernel::{kernel_fcn, Activation, QuadratureOptions};
use pseudoiid::propagate::{run_ensemble, sample_sphere, Inputs, NetworkConfig, Probe};
use pseudoiid::stats::{histogram, ks_to_gaussian, Level};
use pseudoiid::weights::{Family, SamplerSpec, SizeSpec};
use pseudoiid::RngSeed;

const MAX_DEPTH: usize = 50;
const MAX_WIDTH: usize = 200;
const MAX_TRIALS: usize = 5000;
const INPUT_DIM: usize = 9;

fn activation(name: &str) -> Result<Activation, String> {
    serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| format!("unknown activation `{name}`"))
}

fn family(name: &str) -> Result<Family, String> {
    Ok(match name {
        "iid_gaussian" => Family::IidGaussian,
        "iid_uniform" => Family::IidUniform,
        "iid_dropout" => Family::IidDropout { p: 0.5 },
        "low_rank" => Family::LowRank { rank: SizeSpec::Fraction { fraction: 0.5 } },
        "block_sparse" => Family::BlockSparse { block: SizeSpec::Fraction { fraction: 0.2 } },
        "haar_orthogonal" => Family::HaarOrthogonal,
        other => return Err(format!("unknown family `{other}`")),
    })
}

#[derive(Debug, Serialize)]
pub struct DepthProfile {
    pub layers: Vec<usize>,
    /// `K(x, x)` per layer.
    pub variance: Vec<f64>,
    /// `K(x, x') / K(x, x)` per layer for two unit inputs at angle `angle`.
    pub correlation: Vec<f64>,
}

/// Limiting variance and correlation of two unit inputs at angle `angle`
/// (radians) through `depth` hidden layers.
pub fn depth_profile_report(act: &str, sigma_w2: f64, sigma_b2: f64, depth: usize, angle: f64) -> Result<DepthProfile, String> {
    if depth > MAX_DEPTH {
        return Err(format!("depth is capped at {MAX_DEPTH}"));
    }
    let act = activation(act)?;
    let x = vec![vec![1.0, 0.0], vec![angle.cos(), angle.sin()]];
    let tables = kernel_fcn(&x, depth, sigma_b2, sigma_w2, &act, QuadratureOptions::default()).map_err(|e| e.to_string())?;
    Ok(DepthProfile {
        layers: tables.iter().map(|t| t.layer).collect(),
        variance: tables.iter().map(|t| t.get(0, 0)).collect(),
        correlation: tables.iter().map(|t| t.get(0, 1) / (t.get(0, 0) * t.get(1, 1)).sqrt()).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct CriticalPoint {
    pub sigma_b2: f64,
    pub sigma_w2: f64,
    pub q_star: f64,
}

/// `sigma_w2` on the edge of chaos for each bias variance in `sigma_b2`.
pub fn edge_of_chaos_report(act: &str, sigma_b2: &[f64]) -> Result<Vec<CriticalPoint>, String> {
    let act = activation(act)?;
    let points = eoc_solve(&act, sigma_b2, EocOptions::default()).map_err(|e| e.to_string())?;
    Ok(points.into_iter().map(|p| CriticalPoint { sigma_b2: p.sigma_b2, sigma_w2: p.sigma_w2, q_star: p.q_star }).collect())
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub target_variance: f64,
    pub sample_variance: f64,
    pub ks: f64,
    pub ks_critical: f64,
    /// `(lo, hi, density)` per bin.
    pub bins: Vec<(f64, f64, f64)>,
}

/// Histogram of the first neuron of the last layer of a tanh network with
/// `depth` hidden layers of width `width`, against its limiting Gaussian.
pub fn histogram_report(family_name: &str, width: usize, depth: usize, trials: usize, seed: u64) -> Result<Histogram, String> {
    if width == 0 || width > MAX_WIDTH || depth == 0 || depth > 10 || !(100..=MAX_TRIALS).contains(&trials) {
        return Err(format!("need 1 <= width <= {MAX_WIDTH}, 1 <= depth <= 10, 100 <= trials <= {MAX_TRIALS}"));
    }
    let sigma_w2 = 2.0;
    let act = Activation::TANH;
    let seed = RngSeed::new(seed);
    let x = vec![sample_sphere(INPUT_DIM, &mut seed.child(u64::MAX).rng())];
    let target = kernel_fcn(&x, depth, 0.0, sigma_w2, &act, QuadratureOptions::default()).map_err(|e| e.to_string())?[depth].get(0, 0);
    let spec = SamplerSpec::new(family(family_name)?, sigma_w2);
    let net = NetworkConfig::fcn([vec![INPUT_DIM], vec![width; depth + 1]].concat(), act, 0.0, spec).map_err(|e| e.to_string())?;
    let table = run_ensemble(&net, &Inputs::Vectors(x), &[Probe::neuron(depth + 1, 0, 0)], trials, &seed).map_err(|e| e.to_string())?;
    let xs = table.column(0);
    let fit = ks_to_gaussian(&xs, target, Level::One).map_err(|e| e.to_string())?;
    let bins = histogram(&xs, 30, None).map_err(|e| e.to_string())?;
    Ok(Histogram {
        target_variance: target,
        sample_variance: xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64,
        ks: fit.ks[0].statistic,
        ks_critical: fit.ks[0].critical_1,
        bins: bins.iter().map(|b| (b.left, b.right, b.count as f64 / (trials as f64 * (b.right - b.left)))).collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn depth_profile(act: &str, sigma_w2: f64, sigma_b2: f64, depth: usize, angle: f64) -> Result<String, JsError> {
    to_js(depth_profile_report(act, sigma_w2, sigma_b2, depth, angle))
}

#[wasm_bindgen]
pub fn edge_of_chaos(act: &str, sigma_b2: Vec<f64>) -> Result<String, JsError> {
    to_js(edge_of_chaos_report(act, &sigma_b2))
}

#[wasm_bindgen]
pub fn preactivation_histogram(family: &str, width: usize, depth: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    to_js(histogram_report(family, width, depth, trials, seed))
}
