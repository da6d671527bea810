use serde_json::json;

use pseudoiid::weights::{sample_layer, write_triplets, WeightMatrix, WeightMeta};
use pseudoiid::SCHEMA_VERSION;

use super::{Ctx, Output};
use crate::config::SampleConfig;
use crate::error::CliError;

/// Matrix `i` is drawn from stream `seed / i`.
pub(super) fn run(cfg: &SampleConfig, ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    cfg.spec.validate().map_err(|e| CliError::at("sample.spec", e))?;
    if cfg.dims.is_empty() {
        return Err(CliError::at("sample.dims", "at least one [m, n] pair is required"));
    }
    if cfg.dims.iter().any(|&(m, n)| m == 0 || n == 0) {
        return Err(CliError::at("sample.dims", "dimensions must be positive"));
    }
    let mut matrices = Vec::new();
    for (i, &(m, n)) in cfg.dims.iter().enumerate() {
        let seed = ctx.seed.child(i as u64);
        let layer = sample_layer(&cfg.spec, m, n, &mut seed.rng())?;
        let w = WeightMatrix { entries: layer.to_dense(), meta: Some(WeightMeta { spec: cfg.spec.clone(), seed }) };
        let name = format!("sample_{i}_{m}x{n}.csv");
        let mut nnz = 0;
        out.csv(&name, |f| {
            nnz = write_triplets(&w, f)?;
            Ok(())
        })?;
        matrices.push(json!({ "file": name, "m": m, "n": n, "nnz": nnz, "mean_square": w.mean_square() }));
    }
    out.json(
        "sample.json",
        &json!({ "schema_version": SCHEMA_VERSION, "spec": cfg.spec, "seed": ctx.seed, "matrices": matrices }),
    )
}
