//! Family x width grids of Monte-Carlo ensembles, and their comparison with
//! the kernel prediction.

use serde_json::json;

use pseudoiid::kernel::{kernel_cnn, kernel_fcn, QuadratureOptions};
use pseudoiid::propagate::{run_ensemble, EnsembleTable, Inputs, NetworkConfig, Probe};
use pseudoiid::stats::{
    histogram, independence_check, joint_gauss_fit, ks_to_gaussian, qq_points, write_histogram_csv, write_qq_csv,
    JointFitOptions, Level,
};
use pseudoiid::weights::SamplerSpec;
use pseudoiid::SCHEMA_VERSION;

use super::{Ctx, Output};
use crate::config::{ArchKind, SweepConfig};
use crate::error::CliError;

struct Cell {
    family: usize,
    width: usize,
    tag: String,
    network: NetworkConfig,
    table: EnsembleTable,
}

fn network(cfg: &SweepConfig, inputs: &Inputs, spec: &SamplerSpec, width: usize) -> Result<NetworkConfig, CliError> {
    let mut sizes = vec![width; cfg.depth + 2];
    let net = match (cfg.architecture, inputs) {
        (ArchKind::Fcn, Inputs::Vectors(x)) => {
            sizes[0] = x[0].len();
            NetworkConfig::fcn(sizes, cfg.activation.clone(), cfg.sigma_b2, spec.clone())
        }
        (ArchKind::Cnn, Inputs::Images(imgs)) => {
            let (c, h, w) = imgs[0].shape();
            sizes[0] = c;
            let k = cfg.k.ok_or_else(|| CliError::at("k", "convolutional sweeps need a filter size k"))?;
            NetworkConfig::cnn(sizes, k, (h, w), cfg.activation.clone(), cfg.sigma_b2, spec.clone())
        }
        (ArchKind::Fcn, Inputs::Images(_)) => return Err(CliError::at("inputs", "fcn sweeps need vector inputs")),
        (ArchKind::Cnn, Inputs::Vectors(_)) => return Err(CliError::at("inputs", "cnn sweeps need image inputs")),
    };
    net.map_err(|e| CliError::at("families", e))
}

/// Cell `(f, w)` draws its weights from stream `seed / f / w`.
fn run_cells(cfg: &SweepConfig, ctx: &Ctx) -> Result<(Inputs, Vec<Cell>), CliError> {
    if cfg.widths.is_empty() || cfg.families.is_empty() || cfg.probes.is_empty() {
        return Err(CliError::config("widths, families and probes must be non-empty", None));
    }
    if cfg.depth == 0 {
        return Err(CliError::at("depth", "must be at least 1"));
    }
    let inputs = cfg.inputs.resolve(&ctx.seed)?;
    if inputs.is_empty() {
        return Err(CliError::at("inputs", "no inputs"));
    }
    let trials = ctx.trials.unwrap_or(cfg.trials);
    if trials == 0 {
        return Err(CliError::at("trials", "must be positive"));
    }
    let mut cells = Vec::new();
    for (f, spec) in cfg.families.iter().enumerate() {
        for (w, &width) in cfg.widths.iter().enumerate() {
            let net = network(cfg, &inputs, spec, width)?;
            let seed = ctx.seed.children(&[f as u64, w as u64]);
            let table = run_ensemble(&net, &inputs, &cfg.probes, trials, &seed)?;
            let tag = format!("{f}_{}_w{width}", spec.family.name());
            cells.push(Cell { family: f, width, tag, network: net, table });
        }
    }
    Ok((inputs, cells))
}

fn write_ensembles(cells: &[Cell], out: &mut Output) -> Result<(), CliError> {
    for c in cells {
        out.csv(&format!("ensemble_{}.csv", c.tag), |f| c.table.write_csv(f))?;
        out.json(&format!("ensemble_{}.json", c.tag), &c.table.sidecar(&c.network)?)?;
    }
    Ok(())
}

pub(super) fn simulate(cfg: &SweepConfig, ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let (_, cells) = run_cells(cfg, ctx)?;
    write_ensembles(&cells, out)
}

/// Limiting covariance between probes `a` and `b` of a network with hidden
/// weight variance `sigma_w2`. Distinct neurons or channels are independent
/// in the limit.
struct Prediction {
    fcn: Option<Vec<pseudoiid::kernel::KernelTable>>,
    cnn: Option<Vec<pseudoiid::kernel::ConvKernelTable>>,
}

impl Prediction {
    fn new(cfg: &SweepConfig, inputs: &Inputs, sigma_w2: f64) -> Result<Self, CliError> {
        let opts = QuadratureOptions::default();
        Ok(match inputs {
            Inputs::Vectors(x) => Prediction {
                fcn: Some(kernel_fcn(x, cfg.depth, cfg.sigma_b2, sigma_w2, &cfg.activation, opts)?),
                cnn: None,
            },
            Inputs::Images(imgs) => {
                let k = cfg.k.ok_or_else(|| CliError::at("k", "convolutional sweeps need a filter size k"))?;
                Prediction { fcn: None, cnn: Some(kernel_cnn(imgs, cfg.depth, cfg.sigma_b2, sigma_w2, k, &cfg.activation, opts)?) }
            }
        })
    }

    fn covariance(&self, a: &Probe, b: &Probe) -> Result<f64, CliError> {
        if a.layer != b.layer || a.index != b.index {
            return Ok(0.0);
        }
        let l = a.layer - 1;
        if let Some(t) = &self.fcn {
            return Ok(t[l].get(a.input, b.input));
        }
        let t = &self.cnn.as_ref().expect("one of the two is set")[l];
        let (pa, pb) = (a.pixel.expect("validated probe"), b.pixel.expect("validated probe"));
        Ok(t.covariance(a.input, pa, b.input, pb)?)
    }
}

/// Per cell: KS and Wasserstein fit of every probe to its predicted
/// marginal, histogram and Q-Q CSVs, and for two probes a joint fit plus an
/// independence check when they sit on different neurons.
pub(super) fn compare(cfg: &SweepConfig, ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    let (inputs, cells) = run_cells(cfg, ctx)?;
    write_ensembles(&cells, out)?;
    let predictions = cfg
        .families
        .iter()
        .map(|s| Prediction::new(cfg, &inputs, s.sigma_w2))
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = Vec::new();
    for c in &cells {
        let pred = &predictions[c.family];
        let mut marginal = Vec::new();
        let mut targets = Vec::new();
        for (p, probe) in cfg.probes.iter().enumerate() {
            let xs = c.table.column(p);
            let target = pred.covariance(probe, probe)?;
            let fit = ks_to_gaussian(&xs, target, Level::One)?;
            let bins = histogram(&xs, cfg.bins, None)?;
            out.csv(&format!("hist_{}_p{p}.csv", c.tag), |f| write_histogram_csv(&bins, f))?;
            let qq = qq_points(&xs, target)?;
            out.csv(&format!("qq_{}_p{p}.csv", c.tag), |f| write_qq_csv(&qq, f))?;
            targets.push(target);
            marginal.push(fit);
        }
        let (mut joint, mut independence) = (None, None);
        if let [pa, pb] = cfg.probes.as_slice() {
            let (a, b) = (c.table.column(0), c.table.column(1));
            let cross = pred.covariance(pa, pb)?;
            let target = [[targets[0], cross], [cross, targets[1]]];
            joint = Some(joint_gauss_fit(&a, &b, target, JointFitOptions::default())?);
            if pa.index != pb.index {
                independence = Some(independence_check(&a, &b, 0.0)?);
            }
        }
        let report = json!({
            "schema_version": SCHEMA_VERSION,
            "family": cfg.families[c.family],
            "width": c.width,
            "trials": c.table.trials,
            "probes": cfg.probes,
            "target_variance": targets,
            "marginal": marginal,
            "joint": joint,
            "independence": independence,
        });
        out.json(&format!("compare_{}.json", c.tag), &report)?;
        summary.push(json!({
            "cell": c.tag,
            "ks": marginal.iter().map(|m| m.ks[0].statistic).collect::<Vec<_>>(),
            "marginal_pass": marginal.iter().all(|m| m.verdict),
            "joint_pass": joint.as_ref().map(|j| j.verdict),
            "correlation": independence.as_ref().map(|i| i.correlation),
        }));
    }
    out.json("compare_summary.json", &json!({ "schema_version": SCHEMA_VERSION, "cells": summary }))
}
