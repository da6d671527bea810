use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::kernel::{derivative_second_moment, pair_expectation, Activation, QuadratureOptions};
use crate::weights::fmt_f64;
use crate::{par, Error, Result};

/// Search interval for `sigma_w2` on the Edge of Chaos.
pub const EOC_BRACKET: (f64, f64) = (1e-4, 25.0);
/// Variances beyond this are treated as unbounded growth.
const OVERFLOW_GUARD: f64 = 1e150;
const UNDERFLOW: f64 = 1e-200;

/// `q -> sigma_b2 + sigma_w2 E[phi(u)^2]`, `u ~ N(0, q)`.
pub fn variance_map(q: f64, sigma_b2: f64, sigma_w2: f64, act: &Activation, opts: QuadratureOptions) -> Result<f64> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::invalid(format!("variance must be non-negative, got {q}")));
    }
    Ok(sigma_b2 + sigma_w2 * pair_expectation(q, q, q, act, opts)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub q0: f64,
    pub damping: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol: 1e-12, max_iter: 1000, q0: 1.0, damping: 0.5, quadrature: Default::default() }
    }
}

/// Fixed point `q*` of [`variance_map`]: damped iteration from `q0`, then a
/// bracketing bisection when the iteration is slow (near criticality).
pub fn fixed_point(sigma_b2: f64, sigma_w2: f64, act: &Activation, opts: FixedPointOptions) -> Result<f64> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::invalid("damping must lie in (0, 1]"));
    }
    if !(sigma_w2 > 0.0 && sigma_b2 >= 0.0) {
        return Err(Error::invalid("need sigma_w2 > 0 and sigma_b2 >= 0"));
    }
    let map = |q: f64| variance_map(q, sigma_b2, sigma_w2, act, opts.quadrature);
    let mut q = opts.q0;
    for it in 0..opts.max_iter {
        let next = map(q)?;
        if (next - q).abs() < opts.tol {
            return Ok(q);
        }
        q = (1.0 - opts.damping) * q + opts.damping * next;
        if !(q.is_finite() && q <= OVERFLOW_GUARD) {
            return Err(Error::Divergence { iterations: it + 1, limit: OVERFLOW_GUARD });
        }
    }

    let g = |q: f64| map(q).map(|v| v - q);
    let gq = g(q)?;
    if gq.abs() < opts.tol {
        return Ok(q);
    }
    let (mut lo, mut hi) = if gq > 0.0 {
        let mut hi = q;
        loop {
            hi *= 2.0;
            if hi > OVERFLOW_GUARD {
                return Err(Error::Divergence { iterations: opts.max_iter, limit: OVERFLOW_GUARD });
            }
            let gh = g(hi)?;
            if gh.abs() < opts.tol {
                return Ok(hi);
            }
            if gh < 0.0 {
                break (hi / 2.0, hi);
            }
        }
    } else {
        let mut lo = q;
        loop {
            lo /= 2.0;
            if lo < UNDERFLOW {
                if sigma_b2 == 0.0 && g(0.0)?.abs() < opts.tol {
                    return Ok(0.0);
                }
                return Err(Error::NoConvergence(opts.max_iter));
            }
            let gl = g(lo)?;
            if gl.abs() < opts.tol {
                return Ok(lo);
            }
            if gl > 0.0 {
                break (lo, lo * 2.0);
            }
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm.abs() < opts.tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(mid);
        }
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// `chi_1 = sigma_w2 E[phi'(u)^2]`, `u ~ N(0, q)`.
pub fn chi1(q: f64, sigma_w2: f64, act: &Activation, order: usize) -> Result<f64> {
    Ok(sigma_w2 * derivative_second_moment(q, act, order)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EocPoint {
    pub sigma_b2: f64,
    pub sigma_w2: f64,
    pub q_star: f64,
    pub chi1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EocOptions {
    pub bracket: (f64, f64),
    /// Absolute tolerance on `sigma_w2`.
    pub tol: f64,
    pub fixed_point: FixedPointOptions,
}

impl Default for EocOptions {
    fn default() -> Self {
        // Near the critical line the map is nearly tangent to the identity, so
        // q* is only accurate if the fixed point is solved to round-off.
        let fixed_point = FixedPointOptions { tol: f64::MIN_POSITIVE, ..Default::default() };
        EocOptions { bracket: EOC_BRACKET, tol: 1e-9, fixed_point }
    }
}

/// `chi_1(q*(sigma_w2), sigma_w2) - 1`; unbounded variance growth counts as
/// the chaotic side.
fn criticality(sigma_b2: f64, sigma_w2: f64, act: &Activation, opts: &EocOptions) -> Result<(f64, f64)> {
    match fixed_point(sigma_b2, sigma_w2, act, opts.fixed_point) {
        Ok(q) => Ok((q, chi1(q, sigma_w2, act, opts.fixed_point.quadrature.order)? - 1.0)),
        Err(Error::Divergence { .. }) => Ok((f64::INFINITY, f64::INFINITY)),
        Err(e) => Err(e),
    }
}

/// For each `sigma_b2`, bisect on `sigma_w2` for `chi_1 = 1`.
pub fn eoc_solve(act: &Activation, sigma_b2_grid: &[f64], opts: EocOptions) -> Result<Vec<EocPoint>> {
    if sigma_b2_grid.is_empty() {
        return Err(Error::invalid("sigma_b2 grid is empty"));
    }
    if act.derivative(0.0).is_none() {
        return Err(Error::Unsupported(format!("activation {} has no derivative", act.name())));
    }
    par::try_map_indexed(sigma_b2_grid.len(), |i| {
        let sb = sigma_b2_grid[i];
        let (mut lo, mut hi) = opts.bracket;
        let (_, f_lo) = criticality(sb, lo, act, &opts)?;
        let (_, f_hi) = criticality(sb, hi, act, &opts)?;
        if f_lo > 0.0 || f_hi < 0.0 {
            return Err(Error::NoSignChange { lo, hi });
        }
        while hi - lo > opts.tol {
            let mid = 0.5 * (lo + hi);
            let (_, f) = criticality(sb, mid, act, &opts)?;
            if f == 0.0 {
                lo = mid;
                hi = mid;
            } else if f < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut sigma_w2 = 0.5 * (lo + hi);
        let (mut q_star, mut f) = criticality(sb, sigma_w2, act, &opts)?;
        if !q_star.is_finite() {
            // Linear-like maps blow up on the chaotic side; stay on the ordered one.
            sigma_w2 = lo;
            (q_star, f) = criticality(sb, sigma_w2, act, &opts)?;
            if !q_star.is_finite() {
                return Err(Error::Divergence { iterations: opts.fixed_point.max_iter, limit: OVERFLOW_GUARD });
            }
        }
        Ok(EocPoint { sigma_b2: sb, sigma_w2, q_star, chi1: f + 1.0 })
    })
}

/// CSV `sigma_b2,sigma_w2,q_star`.
pub fn write_eoc_csv<W: Write>(points: &[EocPoint], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["sigma_b2", "sigma_w2", "q_star"])?;
    for p in points {
        wr.write_record([fmt_f64(p.sigma_b2), fmt_f64(p.sigma_w2), fmt_f64(p.q_star)])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn variance_map_closed_cases() {
        let o = QuadratureOptions::default();
        assert!((variance_map(0.7, 0.0, 3.0, &Activation::IDENTITY, o).unwrap() - 2.1).abs() < 1e-14);
        assert!((variance_map(0.7, 0.0, 3.0, &Activation::RELU, o).unwrap() - 1.05).abs() < 1e-14);
        assert!(variance_map(-1.0, 0.0, 1.0, &Activation::RELU, o).is_err());
    }

    #[test]
    fn tanh_variance_map_against_monte_carlo() {
        let mut rng = RngSeed::new(3).rng();
        let n = 2_000_000;
        let mc = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).tanh().powi(2)).sum::<f64>() / n as f64;
        let v = variance_map(1.0, 0.0, 4.0, &Activation::TANH, Default::default()).unwrap();
        assert!((v - 4.0 * mc).abs() < 1e-3, "{v} vs {}", 4.0 * mc);
    }

    #[test]
    fn neutral_maps_return_start() {
        let o = FixedPointOptions::default();
        assert_eq!(fixed_point(0.0, 1.0, &Activation::IDENTITY, o).unwrap(), 1.0);
        assert_eq!(fixed_point(0.0, 2.0, &Activation::RELU, o).unwrap(), 1.0);
    }

    #[test]
    fn tanh_fixed_point_is_stable_under_restart() {
        let act = Activation::TANH;
        let base = FixedPointOptions::default();
        let q = fixed_point(0.01, 4.0, &act, base).unwrap();
        assert!(q > 0.0);
        let residual = variance_map(q, 0.01, 4.0, &act, Default::default()).unwrap() - q;
        assert!(residual.abs() < base.tol);
        for q0 in [0.1, 10.0] {
            let r = fixed_point(0.01, 4.0, &act, FixedPointOptions { q0, ..base }).unwrap();
            assert!((r - q).abs() < 1e-9);
        }
    }

    #[test]
    fn subcritical_and_critical_tanh_collapse_to_zero() {
        let o = FixedPointOptions::default();
        assert!(fixed_point(0.0, 0.5, &Activation::TANH, o).unwrap() < 1e-10);
        assert!(fixed_point(0.0, 1.0, &Activation::TANH, o).unwrap() < 1e-5);
    }

    #[test]
    fn growth_is_reported_as_divergence() {
        let e = fixed_point(0.0, 2.0, &Activation::IDENTITY, Default::default()).unwrap_err();
        assert!(matches!(e, Error::Divergence { .. }));
        assert!(e.to_string().contains("chaotic variance growth"));
    }

    #[test]
    fn chi1_closed_forms() {
        assert_eq!(chi1(0.3, 1.7, &Activation::IDENTITY, 40).unwrap(), 1.7);
        assert_eq!(chi1(0.3, 1.7, &Activation::RELU, 40).unwrap(), 0.85);
        assert!((chi1(0.0, 1.7, &Activation::TANH, 40).unwrap() - 1.7).abs() < 1e-14);
        let no_deriv = Activation::custom("sin", f64::sin, 1.0, 0.0, vec![]).unwrap();
        assert!(chi1(1.0, 1.0, &no_deriv, 40).is_err());
    }

    #[test]
    fn eoc_zero_bias_points() {
        let pts = eoc_solve(&Activation::TANH, &[0.0], Default::default()).unwrap();
        assert!((pts[0].sigma_w2 - 1.0).abs() < 1e-6);
        let pts = eoc_solve(&Activation::RELU, &[0.0], Default::default()).unwrap();
        assert!((pts[0].sigma_w2 - 2.0).abs() < 1e-6);
        let pts = eoc_solve(&Activation::IDENTITY, &[0.0], Default::default()).unwrap();
        assert!((pts[0].sigma_w2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn eoc_points_are_critical() {
        let act = Activation::TANH;
        let grid = [0.0, 0.01, 0.05, 0.1, 0.3];
        let pts = eoc_solve(&act, &grid, Default::default()).unwrap();
        let mut prev = 0.0;
        for p in &pts {
            let q = fixed_point(p.sigma_b2, p.sigma_w2, &act, Default::default()).unwrap();
            let c = chi1(q, p.sigma_w2, &act, 40).unwrap();
            assert!((c - 1.0).abs() < 1e-5, "{p:?}: chi1 = {c}");
            assert!(p.sigma_w2 >= prev);
            prev = p.sigma_w2;
        }
        let mut buf = Vec::new();
        write_eoc_csv(&pts, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), grid.len() + 1);
        assert!(eoc_solve(&act, &[], Default::default()).is_err());
    }
}
