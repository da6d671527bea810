use super::controls::ConvSampler;
use super::estimators::{
    curve_point, exchangeability, four_cross_rows, run_trials, second_moments, Source, TrialOptions, TrialStats,
};
use super::{
    check_increasing, judge, judge_with_band, tolerance, Budget, ConditionRecord, ConvBudget, FourCross, MomentCurve,
    Projection, RegimeReport, Verdict,
};
use crate::rng::RngSeed;
use crate::weights::WeightSampler;
use crate::{Error, Result, SCHEMA_VERSION};

/// Largest log-log slope of the eighth-moment curve still read as bounded.
const SLOPE_BAND: f64 = 0.5;

/// Run every condition on square `n x n` draws for each `n` in the budget.
pub fn classify(sampler: &dyn WeightSampler, budget: &Budget, seed: &RngSeed) -> Result<RegimeReport> {
    check_increasing(&budget.n_list, "n_list")?;
    let sources = budget.n_list.iter().map(|&n| Source::Matrix { sampler, m: n, n }).collect();
    run(sources, budget.trials, seed, &FourCross::matrix_defaults())
}

/// Run every condition on `c_out x c_in x k x k` kernels, pixel indices
/// included in the four-cross patterns.
pub fn classify_conv(sampler: &dyn ConvSampler, budget: &ConvBudget, seed: &RngSeed) -> Result<RegimeReport> {
    check_increasing(&budget.c_in_list, "c_in_list")?;
    if budget.c_in_list.len() != budget.c_out_list.len() {
        return Err(Error::invalid(format!(
            "c_in_list has {} entries but c_out_list has {}",
            budget.c_in_list.len(),
            budget.c_out_list.len()
        )));
    }
    let sources = budget
        .c_in_list
        .iter()
        .zip(&budget.c_out_list)
        .map(|(&c_in, &c_out)| Source::Conv { sampler, c_out, c_in, k: budget.k })
        .collect();
    run(sources, budget.trials, seed, &FourCross::conv_defaults())
}

fn record(condition: &str, name: &str, n: usize, estimate: f64, stderr: f64, target: f64) -> ConditionRecord {
    ConditionRecord {
        condition: condition.to_string(),
        name: name.to_string(),
        n,
        estimate,
        stderr: Some(stderr),
        target,
        tolerance: tolerance(target, stderr),
        verdict: judge(estimate, stderr, target),
        note: None,
    }
}

fn run(sources: Vec<Source>, trials: usize, seed: &RngSeed, patterns: &[FourCross]) -> Result<RegimeReport> {
    if trials < 1000 {
        return Err(Error::invalid(format!("classification needs at least 1000 trials, got {trials}")));
    }
    let last = sources.len() - 1;
    let mut points = Vec::new();
    let mut first_cross = Vec::new();
    let mut final_stats: Vec<TrialStats> = Vec::new();
    for (idx, src) in sources.iter().enumerate() {
        let opts = TrialOptions { projection: Projection::Ones, patterns, exchangeability: idx == last };
        let stats = run_trials(src, trials, seed, &opts)?;
        points.push(curve_point(src, &stats));
        if idx == 0 {
            first_cross = four_cross_rows(src, &stats, patterns);
        }
        if idx == last {
            final_stats = stats;
        }
    }
    let src = &sources[last];
    let n = src.dims().fan_in;
    let mut conditions = Vec::new();

    for (name, ks) in exchangeability(src, &final_stats)?.tests {
        conditions.push(ConditionRecord {
            condition: "i".into(),
            name,
            n,
            estimate: ks.statistic,
            stderr: None,
            target: 0.0,
            tolerance: ks.critical,
            verdict: if ks.pass { Verdict::Pass } else { Verdict::Fail },
            note: None,
        });
    }

    let sm = second_moments(src, &final_stats, trials);
    let mut var = record("ii", "variance", n, sm.variance.estimate, sm.variance.stderr, 1.0);
    if !sm.convergent {
        var.verdict = Verdict::Fail;
        var.note = Some("running mean drifts away from the median of means; variance estimate does not converge".into());
    }
    conditions.push(var);
    conditions.push(record("ii", "mean", n, sm.mean.estimate, sm.mean.stderr, 0.0));
    for c in &sm.cross {
        conditions.push(record("ii", &c.name, n, c.value.estimate, c.value.stderr, 0.0));
    }

    let curve = MomentCurve { label: src.label(), projection: Projection::Ones, points };
    conditions.push(slope_record(&curve, n));

    let last_cross = four_cross_rows(src, &final_stats, patterns);
    for (lo, hi) in first_cross.iter().zip(&last_cross) {
        let mut r = record("iv", &hi.pattern, n, hi.estimate, hi.stderr, hi.target);
        if last > 0 {
            let slack = 3.0 * lo.stderr.hypot(hi.stderr);
            if (hi.estimate - hi.target).abs() > (lo.estimate - lo.target).abs() + slack {
                r.verdict = Verdict::Fail;
                r.note = Some(format!("moves away from the target between n={} and n={}", lo.n, hi.n));
            }
        }
        conditions.push(r);
    }

    let overall = conditions.iter().map(|r| r.verdict).fold(Verdict::Pass, Verdict::combine);
    let constant_k_estimate = curve.points.iter().map(|p| p.estimate).fold(f64::NEG_INFINITY, f64::max);
    Ok(RegimeReport {
        schema_version: SCHEMA_VERSION,
        label: src.label(),
        kind: if src.is_conv() { "conv" } else { "matrix" }.into(),
        dims: sources.iter().map(Source::dims).collect(),
        trials,
        conditions,
        constant_k_estimate,
        curve,
        overall,
    })
}

/// Condition (iii) as a one-sided bound on the log-log growth rate of the
/// eighth-moment curve between its two largest dimensions.
fn slope_record(curve: &MomentCurve, n: usize) -> ConditionRecord {
    let mut r = ConditionRecord {
        condition: "iii".into(),
        name: "eighth_moment_tail_slope".into(),
        n,
        estimate: f64::NAN,
        stderr: None,
        target: 0.0,
        tolerance: SLOPE_BAND,
        verdict: Verdict::Inconclusive,
        note: None,
    };
    if curve.points.iter().any(|p| !p.estimate.is_finite()) {
        r.verdict = Verdict::Fail;
        r.note = Some("non-finite eighth moment".into());
        return r;
    }
    if curve.points.iter().all(|p| p.estimate == 0.0) {
        r.estimate = 0.0;
        r.stderr = Some(0.0);
        r.verdict = Verdict::Pass;
        return r;
    }
    match curve.tail_slope() {
        Some((slope, se)) => {
            r.estimate = slope;
            r.stderr = Some(se);
            r.tolerance = tolerance_for_slope(se);
            // One-sided: a decaying curve is bounded.
            r.verdict = judge_with_band(slope.max(0.0), se, 0.0, SLOPE_BAND);
        }
        None => r.note = Some("slope needs at least two dimensions with positive estimates".into()),
    }
    r
}

fn tolerance_for_slope(se: f64) -> f64 {
    (3.0 * se).max(SLOPE_BAND)
}
