use serde_json::json;

use pseudoiid::regime::{classify, classify_conv, Budget, ConvBudget, ConvSampler, RegimeReport};
use pseudoiid::weights::WeightSampler;
use pseudoiid::SCHEMA_VERSION;

use super::{slug, Ctx, Output};
use crate::config::{CheckConfig, Subject};
use crate::error::CliError;

enum Law<'a> {
    Matrix(&'a dyn WeightSampler),
    Conv(&'a dyn ConvSampler),
}

fn law<'a>(s: &'a Subject, path: &str) -> Result<Law<'a>, CliError> {
    let set = [s.spec.is_some(), s.control.is_some(), s.shared_filters.is_some()].iter().filter(|b| **b).count();
    if set != 1 {
        return Err(CliError::at(path, "exactly one of spec, control and shared_filters must be set"));
    }
    if let Some(spec) = &s.spec {
        spec.validate().map_err(|e| CliError::at(&format!("{path}.spec"), e))?;
        return Ok(if s.conv { Law::Conv(spec) } else { Law::Matrix(spec) });
    }
    if let Some(c) = &s.control {
        if s.conv {
            return Err(CliError::at(path, "matrix controls cannot be classified as convolution kernels"));
        }
        return Ok(Law::Matrix(c));
    }
    let f = s.shared_filters.as_ref().expect("counted above");
    if !s.conv {
        return Err(CliError::at(path, "shared_filters is a convolution control; set conv = true"));
    }
    Ok(Law::Conv(f))
}

/// Subject `i` runs on stream `seed / i` and writes `check_{i}_{label}.json`
/// plus its eighth-moment curve.
pub(super) fn run(cfg: &CheckConfig, ctx: &Ctx, out: &mut Output) -> Result<(), CliError> {
    if cfg.subjects.is_empty() {
        return Err(CliError::at("check.subjects", "at least one subject is required"));
    }
    let laws = cfg
        .subjects
        .iter()
        .enumerate()
        .map(|(i, s)| law(s, &format!("check.subjects[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut budget = cfg.budget.clone().unwrap_or_default();
    let mut conv = cfg.conv.clone().unwrap_or_default();
    if let Some(t) = ctx.trials {
        budget.trials = t;
        conv.trials = t;
    }
    check_budget(&budget, &conv)?;

    let mut summary = Vec::new();
    for (i, (subject, law)) in cfg.subjects.iter().zip(&laws).enumerate() {
        let seed = ctx.seed.child(i as u64);
        let report: RegimeReport = match law {
            Law::Matrix(s) => classify(*s, &budget, &seed)?,
            Law::Conv(s) => classify_conv(*s, &conv, &seed)?,
        };
        let label = subject.label.clone().unwrap_or_else(|| report.label.clone());
        let tag = format!("{i}_{}", slug(&label));
        out.json(&format!("check_{tag}.json"), &report)?;
        out.csv(&format!("curve_{tag}.csv"), |f| report.curve.write_csv(f))?;
        summary.push(json!({
            "label": label,
            "kind": report.kind,
            "overall": report.overall,
            "conditions": {
                "i": report.verdict("i"),
                "ii": report.verdict("ii"),
                "iii": report.verdict("iii"),
                "iv": report.verdict("iv"),
            },
            "constant_k_estimate": report.constant_k_estimate,
        }));
    }
    out.json("check_summary.json", &json!({ "schema_version": SCHEMA_VERSION, "subjects": summary }))
}

fn check_budget(b: &Budget, c: &ConvBudget) -> Result<(), CliError> {
    if b.trials < 1000 {
        return Err(CliError::at("check.budget.trials", "regime checks need at least 1000 trials"));
    }
    if b.n_list.is_empty() || b.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::at("check.budget.n_list", "must be non-empty and strictly increasing"));
    }
    if c.c_in_list.len() != c.c_out_list.len() || c.c_in_list.is_empty() {
        return Err(CliError::at("check.conv", "c_in_list and c_out_list must be non-empty and of equal length"));
    }
    Ok(())
}
