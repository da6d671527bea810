use serde_json::json;

use pseudoiid::kernel::{kernel_cnn, kernel_fcn, QuadratureOptions};
use pseudoiid::propagate::Inputs;
use pseudoiid::SCHEMA_VERSION;

use super::{Ctx, Output};
use crate::config::KernelConfig;
use crate::error::CliError;

/// Kernel tables for layers `1 ..= depth + 1`, one CSV per layer.
pub(super) fn run(cfg: &KernelConfig, ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    if !(cfg.sigma_w2 > 0.0) || !(cfg.sigma_b2 >= 0.0) {
        return Err(CliError::at("kernel", "need sigma_w2 > 0 and sigma_b2 >= 0"));
    }
    let opts = QuadratureOptions::with_order(cfg.quadrature_order);
    let inputs = cfg.inputs.resolve(&ctx.seed)?;
    let mut layers = Vec::new();
    match (cfg.k, &inputs) {
        (None, Inputs::Vectors(x)) => {
            for t in kernel_fcn(x, cfg.depth, cfg.sigma_b2, cfg.sigma_w2, &cfg.activation, opts)? {
                let name = format!("kernel_layer{}.csv", t.layer);
                out.csv(&name, |f| t.write_csv(None, f))?;
                layers.push(name);
            }
        }
        (Some(k), Inputs::Images(images)) => {
            for t in kernel_cnn(images, cfg.depth, cfg.sigma_b2, cfg.sigma_w2, k, &cfg.activation, opts)? {
                let name = format!("kernel_layer{}.csv", t.layer);
                out.csv(&name, |f| t.write_csv(f))?;
                layers.push(name);
            }
        }
        (None, Inputs::Images(_)) => return Err(CliError::at("kernel.k", "image inputs need a filter size k")),
        (Some(_), Inputs::Vectors(_)) => return Err(CliError::at("kernel.inputs", "a filter size k needs image inputs")),
    }
    out.json(
        "kernel.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "config": cfg,
            "inputs_digest": inputs.digest(),
            "layers": layers,
        }),
    )
}
