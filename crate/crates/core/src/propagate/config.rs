use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kernel::{check_kernel_size, Activation};
use crate::weights::{Family, SamplerSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    /// Layer widths `N_0, ..., N_{L+1}`.
    Fcn { widths: Vec<usize> },
    /// Channel counts `C_0, ..., C_{L+1}` on a `height x width` grid.
    Cnn { channels: Vec<usize>, k: usize, height: usize, width: usize },
}

impl Architecture {
    /// `N_0, ..., N_{L+1}` or `C_0, ..., C_{L+1}`.
    pub fn sizes(&self) -> &[usize] {
        match self {
            Architecture::Fcn { widths } => widths,
            Architecture::Cnn { channels, .. } => channels,
        }
    }

    /// Number of weight layers, `L + 1`.
    pub fn layers(&self) -> usize {
        self.sizes().len().saturating_sub(1)
    }
}

/// A network together with the distributions of its weights.
///
/// `layers[l - 1]` describes `W^(l)`; the first must be iid Gaussian. Biases
/// are iid `N(0, sigma_b2)` in every layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    pub activation: Activation,
    #[serde(default)]
    pub sigma_b2: f64,
    pub layers: Vec<SamplerSpec>,
}

impl NetworkConfig {
    /// iid Gaussian first layer followed by `hidden` everywhere else, all with
    /// `hidden.sigma_w2`.
    pub fn fcn(widths: Vec<usize>, activation: Activation, sigma_b2: f64, hidden: SamplerSpec) -> Result<Self> {
        let layers = Self::layer_specs(widths.len().saturating_sub(1), hidden);
        let cfg = NetworkConfig { architecture: Architecture::Fcn { widths }, activation, sigma_b2, layers };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn cnn(
        channels: Vec<usize>,
        k: usize,
        dims: (usize, usize),
        activation: Activation,
        sigma_b2: f64,
        hidden: SamplerSpec,
    ) -> Result<Self> {
        let layers = Self::layer_specs(channels.len().saturating_sub(1), hidden);
        let cfg = NetworkConfig {
            architecture: Architecture::Cnn { channels, k, height: dims.0, width: dims.1 },
            activation,
            sigma_b2,
            layers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn layer_specs(count: usize, hidden: SamplerSpec) -> Vec<SamplerSpec> {
        (0..count)
            .map(|l| if l == 0 { SamplerSpec::iid_gaussian(hidden.sigma_w2) } else { hidden.clone() })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.architecture.layers().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = self.architecture.sizes();
        if sizes.len() < 3 {
            return Err(Error::invalid(format!(
                "a network needs input, at least one hidden and an output size; got {} sizes",
                sizes.len()
            )));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("layer size {i} is zero")));
        }
        if self.layers.len() != sizes.len() - 1 {
            return Err(Error::mismatch(format!(
                "{} layer specs for {} weight layers",
                self.layers.len(),
                sizes.len() - 1
            )));
        }
        if self.layers[0].family != Family::IidGaussian {
            return Err(Error::invalid(format!(
                "the first layer must be iid_gaussian, got {}",
                self.layers[0].family.name()
            )));
        }
        if !(self.sigma_b2.is_finite() && self.sigma_b2 >= 0.0) {
            return Err(Error::invalid(format!("sigma_b2 must be non-negative, got {}", self.sigma_b2)));
        }
        for spec in &self.layers {
            spec.validate()?;
        }
        if let Architecture::Cnn { k, height, width, .. } = self.architecture {
            check_kernel_size(k)?;
            if height == 0 || width == 0 {
                return Err(Error::invalid("image dimensions must be positive"));
            }
        }
        self.activation.check_envelope()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One recorded preactivation: `h_index^(layer)` of input `input`, at
/// `pixel` for convolutional networks. All indices are 0-based; layers count
/// from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub layer: usize,
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel: Option<(usize, usize)>,
    #[serde(default)]
    pub input: usize,
}

impl Probe {
    pub fn neuron(layer: usize, index: usize, input: usize) -> Self {
        Probe { layer, index, pixel: None, input }
    }

    pub fn channel(layer: usize, index: usize, pixel: (usize, usize), input: usize) -> Self {
        Probe { layer, index, pixel: Some(pixel), input }
    }

    pub(crate) fn check(&self, cfg: &NetworkConfig, inputs: usize) -> Result<()> {
        let sizes = cfg.architecture.sizes();
        let bad = |what: String| Err(Error::invalid(format!("probe {self:?}: {what}")));
        if self.layer == 0 || self.layer >= sizes.len() {
            return bad(format!("layer must lie in 1..={}", sizes.len() - 1));
        }
        if self.index >= sizes[self.layer] {
            return bad(format!("index exceeds layer size {}", sizes[self.layer]));
        }
        if self.input >= inputs {
            return bad(format!("input index exceeds {inputs} inputs"));
        }
        match (&cfg.architecture, self.pixel) {
            (Architecture::Fcn { .. }, None) => Ok(()),
            (Architecture::Fcn { .. }, Some(_)) => bad("pixel given for a fully connected network".into()),
            (Architecture::Cnn { height, width, .. }, Some((r, c))) if r < *height && c < *width => Ok(()),
            (Architecture::Cnn { .. }, _) => bad("missing or out-of-range pixel".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_enforce_gaussian_first_layer() {
        let cfg = NetworkConfig::fcn(vec![4, 8, 8, 1], Activation::TANH, 0.0, SamplerSpec::new(Family::HaarOrthogonal, 2.0))
            .unwrap();
        assert_eq!(cfg.layers[0].family, Family::IidGaussian);
        assert_eq!(cfg.layers[0].sigma_w2, 2.0);
        assert_eq!(cfg.depth(), 2);
        let mut bad = cfg.clone();
        bad.layers[0] = SamplerSpec::new(Family::IidUniform, 2.0);
        assert!(bad.validate().is_err());
        assert!(NetworkConfig::fcn(vec![4, 1], Activation::TANH, 0.0, SamplerSpec::iid_gaussian(1.0)).is_err());
        assert!(NetworkConfig::cnn(vec![1, 4, 1], 2, (5, 5), Activation::TANH, 0.0, SamplerSpec::iid_gaussian(1.0)).is_err());
    }

    #[test]
    fn config_round_trips_and_digest_is_stable() {
        let cfg = NetworkConfig::cnn(vec![1, 4, 1], 3, (5, 6), Activation::RELU, 0.1, SamplerSpec::iid_gaussian(2.0)).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: NetworkConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
        let mut other = cfg.clone();
        other.sigma_b2 = 0.2;
        assert_ne!(other.digest(), cfg.digest());
    }

    #[test]
    fn probe_ranges() {
        let cfg = NetworkConfig::fcn(vec![3, 5, 2], Activation::TANH, 0.0, SamplerSpec::iid_gaussian(1.0)).unwrap();
        assert!(Probe::neuron(2, 1, 0).check(&cfg, 1).is_ok());
        assert!(Probe::neuron(0, 0, 0).check(&cfg, 1).is_err());
        assert!(Probe::neuron(2, 2, 0).check(&cfg, 1).is_err());
        assert!(Probe::neuron(1, 0, 1).check(&cfg, 1).is_err());
        assert!(Probe::channel(1, 0, (0, 0), 0).check(&cfg, 1).is_err());
    }
}
