use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Built-in pointwise nonlinearities; the serialisable subset of
/// [`Activation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Tanh,
    #[serde(rename = "htanh")]
    HTanh,
    Erf,
    Identity,
}

/// A user-supplied nonlinearity with its linear-envelope constants
/// `|f(x)| <= c + m |x|` and the points where it is not smooth.
#[derive(Clone)]
pub struct CustomActivation {
    pub name: String,
    pub f: ScalarFn,
    pub derivative: Option<ScalarFn>,
    pub c: f64,
    pub m: f64,
    pub breakpoints: Vec<f64>,
}

#[derive(Clone)]
pub enum Activation {
    Builtin(ActivationKind),
    Custom(CustomActivation),
}

impl fmt::Debug for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Builtin(k) => write!(f, "{k:?}"),
            Activation::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl From<ActivationKind> for Activation {
    fn from(k: ActivationKind) -> Self {
        Activation::Builtin(k)
    }
}

fn htanh(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

impl Activation {
    pub const RELU: Activation = Activation::Builtin(ActivationKind::Relu);
    pub const TANH: Activation = Activation::Builtin(ActivationKind::Tanh);
    pub const HTANH: Activation = Activation::Builtin(ActivationKind::HTanh);
    pub const ERF: Activation = Activation::Builtin(ActivationKind::Erf);
    pub const IDENTITY: Activation = Activation::Builtin(ActivationKind::Identity);

    /// Wrap a custom function after checking its envelope on a grid.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: f64,
        m: f64,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        let custom = CustomActivation {
            name: name.into(),
            f: Arc::new(f),
            derivative: None,
            c,
            m,
            breakpoints,
        };
        let act = Activation::Custom(custom);
        act.check_envelope()?;
        Ok(act)
    }

    pub fn with_derivative(self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        match self {
            Activation::Custom(mut c) => {
                c.derivative = Some(Arc::new(d));
                Activation::Custom(c)
            }
            other => other,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Activation::Builtin(k) => serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            Activation::Custom(c) => c.name.clone(),
        }
    }

    pub fn kind(&self) -> Option<ActivationKind> {
        match self {
            Activation::Builtin(k) => Some(*k),
            Activation::Custom(_) => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Activation::Builtin(ActivationKind::Relu) => x.max(0.0),
            Activation::Builtin(ActivationKind::Tanh) => x.tanh(),
            Activation::Builtin(ActivationKind::HTanh) => htanh(x),
            Activation::Builtin(ActivationKind::Erf) => erf(x),
            Activation::Builtin(ActivationKind::Identity) => x,
            Activation::Custom(c) => (c.f)(x),
        }
    }

    /// `phi'(x)` where it is known (almost everywhere for kinks).
    pub fn derivative(&self, x: f64) -> Option<f64> {
        match self {
            Activation::Builtin(ActivationKind::Relu) => Some(if x > 0.0 { 1.0 } else { 0.0 }),
            Activation::Builtin(ActivationKind::Tanh) => {
                let s = 1.0 / x.cosh();
                Some(s * s)
            }
            Activation::Builtin(ActivationKind::HTanh) => Some(if x.abs() < 1.0 { 1.0 } else { 0.0 }),
            Activation::Builtin(ActivationKind::Erf) => Some(2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp()),
            Activation::Builtin(ActivationKind::Identity) => Some(1.0),
            Activation::Custom(c) => c.derivative.as_ref().map(|d| d(x)),
        }
    }

    /// Linear-envelope constants `(c, m)`.
    pub fn envelope(&self) -> (f64, f64) {
        match self {
            Activation::Builtin(ActivationKind::Relu) | Activation::Builtin(ActivationKind::Identity) => (0.0, 1.0),
            Activation::Builtin(_) => (1.0, 0.0),
            Activation::Custom(c) => (c.c, c.m),
        }
    }

    /// Points where `phi` is not smooth; quadrature splits there.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Activation::Builtin(ActivationKind::Relu) => &[0.0],
            Activation::Builtin(ActivationKind::HTanh) => &[-1.0, 1.0],
            Activation::Builtin(_) => &[],
            Activation::Custom(c) => &c.breakpoints,
        }
    }

    /// Whether `E[phi(u) phi(v)]` has a closed form.
    pub fn has_closed_form(&self) -> bool {
        matches!(
            self,
            Activation::Builtin(ActivationKind::Relu | ActivationKind::Erf | ActivationKind::Identity)
        )
    }

    /// Spot-check `|phi(x)| <= c + m |x|` on `[-1e3, 1e3]`.
    pub fn check_envelope(&self) -> Result<()> {
        let (c, m) = self.envelope();
        if c < 0.0 || m < 0.0 {
            return Err(Error::invalid("envelope constants must be non-negative"));
        }
        for i in -2000..=2000 {
            let x = i as f64 * 0.5;
            let y = self.eval(x);
            if !y.is_finite() || y.abs() > c + m * x.abs() + 1e-12 {
                return Err(Error::invalid(format!(
                    "activation {} violates |phi(x)| <= {c} + {m}|x| at x = {x}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

impl Serialize for Activation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Activation::Builtin(k) => k.serialize(s),
            Activation::Custom(c) => s.serialize_str(&c.name),
        }
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ActivationKind::deserialize(d).map(Activation::Builtin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_satisfy_envelope() {
        for a in [Activation::RELU, Activation::TANH, Activation::HTANH, Activation::ERF, Activation::IDENTITY] {
            a.check_envelope().unwrap();
        }
    }

    #[test]
    fn custom_envelope_rejected() {
        assert!(Activation::custom("square", |x| x * x, 1.0, 1.0, vec![]).is_err());
        let softplus = Activation::custom("softplus", |x: f64| x.max(0.0) + (-x.abs()).exp().ln_1p(), 1.0, 1.0, vec![]).unwrap();
        assert!((softplus.eval(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn names_round_trip() {
        let a: Activation = serde_json::from_str("\"htanh\"").unwrap();
        assert_eq!(a.kind(), Some(ActivationKind::HTanh));
        assert_eq!(Activation::TANH.name(), "tanh");
        assert!(serde_json::from_str::<Activation>("\"swish\"").is_err());
    }
}
