//! Gaussian expectations by Gauss–Hermite and piecewise Gauss–Legendre rules.
//!
//! Smooth integrands use the probabilists' Gauss–Hermite rule directly. For
//! integrands with kinks (ReLU, hard tanh) polynomial rules converge slowly
//! across the kink, so the real line is truncated to `[-TAIL, TAIL]` standard
//! deviations and split at every breakpoint, each piece getting its own
//! Gauss–Legendre rule against the normal density.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Truncation of the piecewise rule, in standard deviations.
pub const TAIL: f64 = 10.0;

pub const DEFAULT_ORDER: usize = 40;
const MAX_ORDER: usize = 256;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Probabilists' Gauss–Hermite: `sum w_i f(x_i) ~ E[f(Z)]`, `Z ~ N(0, 1)`.
pub fn gauss_hermite(order: usize) -> Result<Arc<Rule>> {
    check_order(order)?;
    cached(&HERMITE, order, compute_hermite)
}

/// Gauss–Legendre on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<Arc<Rule>> {
    check_order(order)?;
    cached(&LEGENDRE, order, compute_legendre)
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::invalid(format!("quadrature order {order} outside [1, {MAX_ORDER}]")));
    }
    Ok(())
}

type Cache = OnceLock<Mutex<HashMap<usize, Arc<Rule>>>>;
static HERMITE: Cache = OnceLock::new();
static LEGENDRE: Cache = OnceLock::new();

fn cached(cache: &Cache, order: usize, build: fn(usize) -> Rule) -> Result<Arc<Rule>> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("quadrature cache poisoned");
    Ok(guard.entry(order).or_insert_with(|| Arc::new(build(order))).clone())
}

/// Newton iteration on the orthonormal physicists' Hermite recurrence,
/// then rescaled to the standard normal weight. Starting points are the
/// eigenvalues of the Jacobi matrix; asymptotic guesses collide above order
/// ~180.
fn compute_hermite(n: usize) -> Rule {
    let mut x_phys = vec![0.0; n];
    let mut w_phys = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64 / 2.0).sqrt() } else { 0.0 });
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guesses.sort_by(|a, b| b.total_cmp(a));
    for i in 0..m {
        let mut z = guesses[i];
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x_phys[i] = z;
        x_phys[n - 1 - i] = -z;
        w_phys[i] = 2.0 / (pp * pp);
        w_phys[n - 1 - i] = w_phys[i];
    }
    let scale = 1.0 / PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = x_phys
        .iter()
        .zip(&w_phys)
        .map(|(x, w)| (x * std::f64::consts::SQRT_2, w * scale))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

fn compute_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Rule { nodes, weights }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E[f(Z)]` for `Z ~ N(0, 1)`; `breaks` are the z-values where `f` has a
/// kink or jump. Rules must come from [`gauss_hermite`]/[`gauss_legendre`]
/// of the same order.
pub fn expect_standard(f: &mut dyn FnMut(f64) -> f64, breaks: &[f64], hermite: &Rule, legendre: &Rule) -> f64 {
    let inside: Vec<f64> = {
        let mut b: Vec<f64> = breaks.iter().copied().filter(|b| b.abs() < TAIL).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    };
    if inside.is_empty() {
        return hermite.nodes.iter().zip(&hermite.weights).map(|(z, w)| w * f(*z)).sum();
    }
    let mut edges = Vec::with_capacity(inside.len() + 2);
    edges.push(-TAIL);
    edges.extend(inside);
    edges.push(TAIL);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in legendre.nodes.iter().zip(&legendre.weights) {
            let z = mid + half * x;
            total += half * w * std_normal_pdf(z) * f(z);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial(k: u32) -> f64 {
        (1..=k).rev().step_by(2).map(|v| v as f64).product()
    }

    #[test]
    fn hermite_is_sound_at_every_order() {
        for n in (8..=MAX_ORDER).step_by(8) {
            let r = gauss_hermite(n).unwrap();
            assert!(r.nodes.windows(2).all(|w| w[1] - w[0] > 1e-3), "order {n}: repeated nodes");
            let m = |k: i32| r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k)).sum::<f64>();
            assert!((m(0) - 1.0).abs() < 1e-12, "order {n}");
            assert!((m(4) - 3.0).abs() < 1e-11, "order {n}");
        }
    }

    #[test]
    fn hermite_integrates_gaussian_moments() {
        let rule = gauss_hermite(40).unwrap();
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for p in 1..=20u32 {
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| w * z.powi(2 * p as i32)).sum();
            let want = double_factorial(2 * p - 1);
            assert!(((got - want) / want).abs() < 1e-11, "moment {}: {got} vs {want}", 2 * p);
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(40).unwrap();
        for p in 0..=39 {
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - want).abs() < 1e-13, "x^{p}");
        }
    }

    #[test]
    fn piecewise_handles_kink() {
        let h = gauss_hermite(40).unwrap();
        let l = gauss_legendre(40).unwrap();
        // E[relu(Z)^2] = 1/2, E[relu(Z)] = 1/sqrt(2 pi)
        let v = expect_standard(&mut |z| z.max(0.0).powi(2), &[0.0], &h, &l);
        assert!((v - 0.5).abs() < 1e-12);
        let v = expect_standard(&mut |z| z.max(0.0), &[0.0], &h, &l);
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(gauss_hermite(0).is_err());
        assert!(gauss_legendre(10_000).is_err());
    }
}
