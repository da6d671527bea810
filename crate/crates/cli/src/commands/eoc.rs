use serde_json::json;

use pseudoiid::analysis::{eoc_solve, write_eoc_csv, EocOptions};
use pseudoiid::SCHEMA_VERSION;

use super::Output;
use crate::config::EocConfig;
use crate::error::CliError;

pub(super) fn run(cfg: &EocConfig, out: &mut Output) -> Result<(), CliError> {
    if cfg.sigma_b2.is_empty() || cfg.sigma_b2.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(CliError::at("eoc.sigma_b2", "a non-empty list of non-negative values is required"));
    }
    let mut opts = EocOptions::default();
    if let Some((lo, hi)) = cfg.bracket {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(CliError::at("eoc.bracket", "need 0 < lo < hi"));
        }
        opts.bracket = (lo, hi);
    }
    let points = eoc_solve(&cfg.activation, &cfg.sigma_b2, opts)?;
    out.csv("eoc.csv", |f| write_eoc_csv(&points, f))?;
    out.json(
        "eoc.json",
        &json!({ "schema_version": SCHEMA_VERSION, "activation": cfg.activation, "points": points }),
    )
}
