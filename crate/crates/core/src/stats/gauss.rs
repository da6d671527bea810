use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_len, check_target, mean};
use crate::{Error, Result};

/// Significance level of a Kolmogorov–Smirnov verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Five,
    #[default]
    One,
}

impl Level {
    /// Asymptotic Kolmogorov quantile `c(alpha)`.
    pub fn coefficient(self) -> f64 {
        match self {
            Level::Five => 1.36,
            Level::One => 1.63,
        }
    }

    pub fn alpha(self) -> f64 {
        match self {
            Level::Five => 0.05,
            Level::One => 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub name: String,
    pub statistic: f64,
    pub critical_5: f64,
    pub critical_1: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussFitReport {
    pub samples: usize,
    /// `1 x 1` or `2 x 2`.
    pub target_covariance: Vec<Vec<f64>>,
    pub empirical_covariance: Vec<Vec<f64>>,
    pub ks: Vec<KsTest>,
    pub wasserstein1: Option<f64>,
    pub covariance_rel_error: Option<f64>,
    pub level: Level,
    pub verdict: bool,
}

fn ks_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn ks_test(name: &str, xs: &[f64], sd: f64, level: Level) -> KsTest {
    let normal = Normal::new(0.0, sd).expect("positive sd");
    let statistic = ks_sorted(&sorted(xs), |x| normal.cdf(x));
    let root = (xs.len() as f64).sqrt();
    let (critical_5, critical_1) = (Level::Five.coefficient() / root, Level::One.coefficient() / root);
    let crit = if level == Level::One { critical_1 } else { critical_5 };
    KsTest { name: name.to_string(), statistic, critical_5, critical_1, pass: statistic < crit }
}

fn empirical_second_moments(a: &[f64], b: &[f64]) -> [f64; 3] {
    let (ma, mb) = (mean(a), mean(b));
    let n = a.len() as f64 - 1.0;
    let mut s = [0.0; 3];
    for (x, y) in a.iter().zip(b) {
        s[0] += (x - ma) * (x - ma);
        s[1] += (x - ma) * (y - mb);
        s[2] += (y - mb) * (y - mb);
    }
    s.map(|v| v / n)
}

/// One-sample KS against the fully specified `N(0, target_variance)`, plus
/// the Wasserstein-1 distance to it.
pub fn ks_to_gaussian(samples: &[f64], target_variance: f64, level: Level) -> Result<GaussFitReport> {
    check_len(samples, 50, "ks_to_gaussian")?;
    check_target(target_variance)?;
    let test = ks_test("marginal", samples, target_variance.sqrt(), level);
    let verdict = test.pass;
    let m = mean(samples);
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len() as f64 - 1.0);
    Ok(GaussFitReport {
        samples: samples.len(),
        target_covariance: vec![vec![target_variance]],
        empirical_covariance: vec![vec![var]],
        ks: vec![test],
        wasserstein1: Some(wasserstein1_to_gaussian(samples, target_variance)?),
        covariance_rel_error: Some((var - target_variance).abs() / target_variance),
        level,
        verdict,
    })
}

/// `int_a^b G^{-1}(u) du` for `G` the `N(0, sd^2)` CDF, with `za`, `zb` the
/// standardised quantiles at `a`, `b`.
fn quantile_integral(sd: f64, za: f64, zb: f64) -> f64 {
    let pdf = |z: f64| if z.is_finite() { (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() } else { 0.0 };
    sd * (pdf(za) - pdf(zb))
}

/// Exact `W_1` between the empirical distribution and `N(0, target_variance)`
/// via `int_0^1 |F_n^{-1}(u) - G^{-1}(u)| du`.
pub fn wasserstein1_to_gaussian(samples: &[f64], target_variance: f64) -> Result<f64> {
    check_len(samples, 1, "wasserstein1_to_gaussian")?;
    check_target(target_variance)?;
    let sd = target_variance.sqrt();
    let std = Normal::standard();
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let z_at = |u: f64| {
        if u <= 0.0 {
            f64::NEG_INFINITY
        } else if u >= 1.0 {
            f64::INFINITY
        } else {
            std.inverse_cdf(u)
        }
    };
    let mut total = 0.0;
    let mut z_lo = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let (a, b) = (i as f64 / n, (i + 1) as f64 / n);
        let z_hi = z_at(b);
        let z_star = x / sd;
        let u_star = std.cdf(z_star);
        let part = if u_star <= a {
            quantile_integral(sd, z_lo, z_hi) - x * (b - a)
        } else if u_star >= b {
            x * (b - a) - quantile_integral(sd, z_lo, z_hi)
        } else {
            x * (u_star - a) - quantile_integral(sd, z_lo, z_star) + quantile_integral(sd, z_star, z_hi)
                - x * (b - u_star)
        };
        total += part.max(0.0);
        z_lo = z_hi;
    }
    Ok(total)
}

/// Tolerances for [`joint_gauss_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointFitOptions {
    pub level: Level,
    /// Largest accepted `||C_hat - C||_F / ||C||_F`.
    pub cov_tolerance: f64,
}

impl Default for JointFitOptions {
    fn default() -> Self {
        JointFitOptions { level: Level::One, cov_tolerance: 0.1 }
    }
}

/// Covariance match plus KS on both marginals and on the normalised sum and
/// difference projections.
pub fn joint_gauss_fit(a: &[f64], b: &[f64], target: [[f64; 2]; 2], opts: JointFitOptions) -> Result<GaussFitReport> {
    if a.len() != b.len() {
        return Err(Error::mismatch(format!("sample lengths {} and {} differ", a.len(), b.len())));
    }
    check_len(a, 100, "joint_gauss_fit")?;
    check_len(b, 100, "joint_gauss_fit")?;
    let [[t11, t12], [t21, t22]] = target;
    if (t12 - t21).abs() > 1e-12 * (t11.abs() + t22.abs()) {
        return Err(Error::invalid("target covariance is not symmetric"));
    }
    check_target(t11)?;
    check_target(t22)?;
    if t12 * t12 > t11 * t22 * (1.0 + 1e-10) {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: 0.5 * (t11 + t22 - ((t11 - t22).powi(2) + 4.0 * t12 * t12).sqrt()),
            floor: 0.0,
        });
    }
    let emp = empirical_second_moments(a, b);
    let diff = (emp[0] - t11).powi(2) + 2.0 * (emp[1] - t12).powi(2) + (emp[2] - t22).powi(2);
    let norm = t11 * t11 + 2.0 * t12 * t12 + t22 * t22;
    let rel = (diff / norm).sqrt();

    let mut ks = vec![ks_test("a", a, t11.sqrt(), opts.level), ks_test("b", b, t22.sqrt(), opts.level)];
    let trace = t11 + t22;
    for (name, sign) in [("sum", 1.0), ("difference", -1.0)] {
        let var = t11 + t22 + 2.0 * sign * t12;
        let proj: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + sign * y).collect();
        if var > 1e-12 * trace {
            ks.push(ks_test(name, &proj, var.sqrt(), opts.level));
        } else {
            // Degenerate direction: the projection must vanish.
            let spread = proj.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let pass = spread <= 1e-6 * trace.sqrt();
            let crit = |l: Level| l.coefficient() / (a.len() as f64).sqrt();
            ks.push(KsTest {
                name: name.to_string(),
                statistic: if pass { 0.0 } else { 1.0 },
                critical_5: crit(Level::Five),
                critical_1: crit(Level::One),
                pass,
            });
        }
    }
    let verdict = rel <= opts.cov_tolerance && ks.iter().all(|t| t.pass);
    Ok(GaussFitReport {
        samples: a.len(),
        target_covariance: vec![vec![t11, t12], vec![t21, t22]],
        empirical_covariance: vec![vec![emp[0], emp[1]], vec![emp[1], emp[2]]],
        ks,
        wasserstein1: None,
        covariance_rel_error: Some(rel),
        level: opts.level,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub correlation: f64,
    pub threshold: f64,
    pub verdict: bool,
}

/// Pass iff `|rho_hat| < 3 / sqrt(T) + slack`. Constant streams count as
/// uncorrelated.
pub fn independence_check(a: &[f64], b: &[f64], slack: f64) -> Result<IndependenceReport> {
    if a.len() != b.len() {
        return Err(Error::mismatch(format!("sample lengths {} and {} differ", a.len(), b.len())));
    }
    check_len(a, 2, "independence_check")?;
    check_len(b, 2, "independence_check")?;
    let [saa, sab, sbb] = empirical_second_moments(a, b);
    let correlation = if saa > 0.0 && sbb > 0.0 { sab / (saa * sbb).sqrt() } else { 0.0 };
    let threshold = 3.0 / (a.len() as f64).sqrt() + slack;
    Ok(IndependenceReport { correlation, threshold, verdict: correlation.abs() < threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleKs {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Two-sample KS: pass iff the samples are indistinguishable at `level`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: Level) -> Result<TwoSampleKs> {
    check_len(a, 1, "ks_two_sample")?;
    check_len(b, 1, "ks_two_sample")?;
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let critical = level.coefficient() * ((na + nb) / (na * nb)).sqrt();
    Ok(TwoSampleKs { statistic: d, critical, pass: d < critical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = RngSeed::new(seed).rng();
        (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn ks_null_and_constant() {
        let xs = normals(10_000, 1.5, 1);
        let r = ks_to_gaussian(&xs, 2.25, Level::One).unwrap();
        assert!(r.ks[0].statistic < 0.0163 && r.verdict);
        assert!((r.ks[0].critical_1 - 0.0163).abs() < 1e-12);
        let c = ks_to_gaussian(&[0.3; 100], 1.0, Level::One).unwrap();
        assert!(c.ks[0].statistic >= 0.5 && !c.verdict);
        assert!(ks_to_gaussian(&xs, 0.0, Level::One).is_err());
        assert!(ks_to_gaussian(&xs[..10], 1.0, Level::One).is_err());
    }

    #[test]
    fn wasserstein_cases() {
        let xs = normals(10_000, 1.0, 2);
        assert!(wasserstein1_to_gaussian(&xs, 1.0).unwrap() < 0.02);
        let shifted: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert!((wasserstein1_to_gaussian(&shifted, 1.0).unwrap() - 1.0).abs() < 0.03);
        assert!(wasserstein1_to_gaussian(&[], 1.0).is_err());
        // a point mass at 0: W1 = E|Z| = sqrt(2/pi)
        let w = wasserstein1_to_gaussian(&[0.0], 1.0).unwrap();
        assert!((w - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn joint_fit_cases() {
        let a = normals(10_000, 1.0, 3);
        let b = normals(10_000, 1.0, 4);
        let eye = [[1.0, 0.0], [0.0, 1.0]];
        let r = joint_gauss_fit(&a, &b, eye, Default::default()).unwrap();
        assert!(r.covariance_rel_error.unwrap() < 0.05 && r.verdict);
        assert_eq!(r.ks.len(), 4);
        let same = joint_gauss_fit(&a, &a, eye, Default::default()).unwrap();
        assert!(!same.verdict);
        assert!((same.empirical_covariance[0][1] - same.empirical_covariance[0][0]).abs() < 1e-12);
        assert!(joint_gauss_fit(&a, &b[..50], eye, Default::default()).is_err());
        // perfectly correlated target matched by identical streams
        let deg = joint_gauss_fit(&a, &a, [[1.0, 1.0], [1.0, 1.0]], Default::default()).unwrap();
        assert!(deg.verdict);
    }

    #[test]
    fn independence_cases() {
        let a = normals(5_000, 1.0, 5);
        let b = normals(5_000, 1.0, 6);
        assert!(independence_check(&a, &b, 0.05).unwrap().verdict);
        let r = independence_check(&a, &a, 0.05).unwrap();
        assert!(!r.verdict && (r.correlation - 1.0).abs() < 1e-12);
        assert!(independence_check(&a, &b[..3], 0.05).is_err());
    }

    #[test]
    fn two_sample_ks() {
        let a = normals(4_000, 1.0, 7);
        let b = normals(4_000, 1.0, 8);
        assert!(ks_two_sample(&a, &b, Level::One).unwrap().pass);
        let c = normals(4_000, 1.3, 9);
        assert!(!ks_two_sample(&a, &c, Level::One).unwrap().pass);
        assert_eq!(ks_two_sample(&a, &a, Level::One).unwrap().statistic, 0.0);
    }

    #[test]
    fn alternatives_flagged_by_both_statistics() {
        let base = normals(10_000, 1.0, 10);
        let null_w1 = wasserstein1_to_gaussian(&base, 1.0).unwrap();
        let mut rng = RngSeed::new(11).rng();
        let cauchy: Vec<f64> = (0..10_000)
            .map(|_| (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan())
            .collect();
        let alts = [
            base.iter().map(|x| x + 0.2).collect::<Vec<_>>(),
            base.iter().map(|x| x * 1.2).collect::<Vec<_>>(),
            cauchy,
        ];
        assert!(ks_to_gaussian(&base, 1.0, Level::One).unwrap().verdict);
        for alt in &alts {
            assert!(!ks_to_gaussian(alt, 1.0, Level::One).unwrap().verdict);
            assert!(wasserstein1_to_gaussian(alt, 1.0).unwrap() > 3.0 * null_w1);
        }
    }
}
