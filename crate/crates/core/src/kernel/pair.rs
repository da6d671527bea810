use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::activation::{Activation, ActivationKind};
use super::quadrature::{expect_standard, gauss_hermite, gauss_legendre, DEFAULT_ORDER};
use crate::{Error, Result};

/// Relative slack accepted on `q_uv^2 <= q_uu q_vv` before the input is
/// rejected as not positive semidefinite.
const PSD_TOL: f64 = 1e-10;
/// Below this `1 - |rho|` the pair is treated as perfectly correlated.
const DEGENERATE_RHO: f64 = 1e-12;

/// Quadrature settings for Gaussian pair expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureOptions {
    /// Nodes per dimension (Gauss–Hermite) or per smooth piece
    /// (Gauss–Legendre).
    pub order: usize,
    /// Ignore closed forms and always integrate numerically.
    pub force_quadrature: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: DEFAULT_ORDER, force_quadrature: false }
    }
}

impl QuadratureOptions {
    pub fn with_order(order: usize) -> Self {
        QuadratureOptions { order, ..Default::default() }
    }

    pub fn quadrature_only(order: usize) -> Self {
        QuadratureOptions { order, force_quadrature: true }
    }
}

/// Clip a 2x2 covariance to PSD and return `(q_uu, q_vv, rho)`.
fn normalise(q_uu: f64, q_uv: f64, q_vv: f64) -> Result<(f64, f64, f64)> {
    if !(q_uu.is_finite() && q_uv.is_finite() && q_vv.is_finite()) {
        return Err(Error::invalid("non-finite covariance entry"));
    }
    let scale = q_uu.abs().max(q_vv.abs()).max(1.0);
    if q_uu < -PSD_TOL * scale || q_vv < -PSD_TOL * scale {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: q_uu.min(q_vv), floor: -PSD_TOL * scale });
    }
    let q_uu = q_uu.max(0.0);
    let q_vv = q_vv.max(0.0);
    let bound = (q_uu * q_vv).sqrt();
    if q_uv.abs() > bound * (1.0 + PSD_TOL) + PSD_TOL * scale {
        let tr = q_uu + q_vv;
        let min_eig = 0.5 * (tr - ((q_uu - q_vv).powi(2) + 4.0 * q_uv * q_uv).sqrt());
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min_eig, floor: -PSD_TOL * scale });
    }
    let rho = if bound > 0.0 { (q_uv / bound).clamp(-1.0, 1.0) } else { 0.0 };
    Ok((q_uu, q_vv, rho))
}

/// `E[phi(u) phi(v)]` for `(u, v) ~ N(0, [[q_uu, q_uv], [q_uv, q_vv]])`.
///
/// ReLU, erf and identity use closed forms unless
/// `opts.force_quadrature`; everything else is integrated with the
/// breakpoint-aware rule from [`super::quadrature`].
pub fn pair_expectation(q_uu: f64, q_uv: f64, q_vv: f64, act: &Activation, opts: QuadratureOptions) -> Result<f64> {
    let (q_uu, q_vv, rho) = normalise(q_uu, q_uv, q_vv)?;
    if !opts.force_quadrature {
        if let Some(v) = closed_form(q_uu, q_vv, rho, act) {
            return Ok(v);
        }
    }
    quadrature(q_uu, q_vv, rho, act, opts.order)
}

fn closed_form(q_uu: f64, q_vv: f64, rho: f64, act: &Activation) -> Option<f64> {
    let s = (q_uu * q_vv).sqrt();
    match act.kind()? {
        ActivationKind::Identity => Some(rho * s),
        ActivationKind::Relu => {
            let theta = rho.acos();
            Some(s / (2.0 * PI) * (theta.sin() + (PI - theta) * rho))
        }
        ActivationKind::Erf => {
            let arg = 2.0 * rho * s / ((1.0 + 2.0 * q_uu) * (1.0 + 2.0 * q_vv)).sqrt();
            Some(2.0 / PI * arg.clamp(-1.0, 1.0).asin())
        }
        _ => None,
    }
}

fn quadrature(q_uu: f64, q_vv: f64, rho: f64, act: &Activation, order: usize) -> Result<f64> {
    let hermite = gauss_hermite(order)?;
    let legendre = gauss_legendre(order)?;
    let a = q_uu.sqrt();
    let b = q_vv.sqrt();
    let bps = quadrature_splits(act);
    let bps = bps.as_slice();
    let scaled = |scale: f64| -> Vec<f64> {
        if scale > 0.0 {
            bps.iter().map(|p| p / scale).collect()
        } else {
            Vec::new()
        }
    };

    if a == 0.0 || b == 0.0 {
        // One side is the constant phi(0).
        let (c0, s) = if a == 0.0 { (act.eval(0.0), b) } else { (act.eval(0.0), a) };
        if s == 0.0 {
            return Ok(c0 * c0);
        }
        let m = expect_standard(&mut |z| act.eval(s * z), &scaled(s), &hermite, &legendre);
        return Ok(c0 * m);
    }

    if 1.0 - rho.abs() < DEGENERATE_RHO {
        let sb = rho.signum() * b;
        let mut breaks = scaled(a);
        breaks.extend(bps.iter().map(|p| p / sb));
        return Ok(expect_standard(&mut |z| act.eval(a * z) * act.eval(sb * z), &breaks, &hermite, &legendre));
    }

    // u = a z1, v = b (rho z1 + c z2)
    let c = (1.0 - rho * rho).sqrt();
    let outer_breaks = scaled(a);
    let mut inner_breaks = vec![0.0; bps.len()];
    let mut outer = |z1: f64| -> f64 {
        let fu = act.eval(a * z1);
        if fu == 0.0 {
            return 0.0;
        }
        for (slot, p) in inner_breaks.iter_mut().zip(bps) {
            *slot = (p / b - rho * z1) / c;
        }
        let inner = expect_standard(&mut |z2| act.eval(b * (rho * z1 + c * z2)), &inner_breaks, &hermite, &legendre);
        fu * inner
    };
    Ok(expect_standard(&mut outer, &outer_breaks, &hermite, &legendre))
}

/// Breakpoints, or the origin for smooth saturating maps whose curvature
/// concentrates there and defeats a single Gauss–Hermite rule at large
/// variance.
fn quadrature_splits(act: &Activation) -> Vec<f64> {
    match act.kind() {
        Some(ActivationKind::Identity) => vec![],
        _ if act.breakpoints().is_empty() => vec![0.0],
        _ => act.breakpoints().to_vec(),
    }
}

/// `E[phi'(u)^2]` for `u ~ N(0, q)`; closed forms where `phi'` is
/// discontinuous or elementary.
pub fn derivative_second_moment(q: f64, act: &Activation, order: usize) -> Result<f64> {
    if q < 0.0 {
        return Err(Error::invalid(format!("variance {q} is negative")));
    }
    match act.kind() {
        Some(ActivationKind::Identity) => return Ok(1.0),
        Some(ActivationKind::Relu) => return Ok(0.5),
        Some(ActivationKind::HTanh) => {
            return Ok(if q > 0.0 { statrs::function::erf::erf(1.0 / (2.0 * q).sqrt()) } else { 1.0 })
        }
        Some(ActivationKind::Erf) => return Ok(4.0 / PI / (1.0 + 4.0 * q).sqrt()),
        _ => {}
    }
    if act.derivative(0.0).is_none() {
        return Err(Error::Unsupported(format!("activation {} has no derivative", act.name())));
    }
    let s = q.sqrt();
    let hermite = gauss_hermite(order)?;
    let legendre = gauss_legendre(order)?;
    let breaks: Vec<f64> = if s > 0.0 { quadrature_splits(act).iter().map(|p| p / s).collect() } else { vec![] };
    Ok(expect_standard(
        &mut |z| {
            let d = act.derivative(s * z).unwrap_or(0.0);
            d * d
        },
        &breaks,
        &hermite,
        &legendre,
    ))
}
