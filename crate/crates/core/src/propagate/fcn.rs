use super::config::{Architecture, NetworkConfig};
use crate::rng::RngSeed;
use crate::weights::{sample_bias, sample_layer, LayerWeights, WeightMatrix};
use crate::{Error, Result};

/// Realised weights and biases of the first `layers.len()` layers.
#[derive(Debug, Clone)]
pub struct NetworkWeights {
    pub layers: Vec<LayerWeights>,
    pub biases: Vec<Vec<f64>>,
}

impl NetworkWeights {
    pub fn from_dense(layers: Vec<WeightMatrix>, biases: Vec<Vec<f64>>) -> Self {
        NetworkWeights { layers: layers.into_iter().map(|w| LayerWeights::Dense(w.entries)).collect(), biases }
    }
}

pub(crate) fn fcn_widths(cfg: &NetworkConfig) -> Result<&[usize]> {
    match &cfg.architecture {
        Architecture::Fcn { widths } => Ok(widths),
        Architecture::Cnn { .. } => Err(Error::invalid("expected a fully connected network")),
    }
}

/// Draw `W^(l), b^(l)` for `l = 1..=up_to`, layer `l` from stream
/// `seed.child(l)`.
pub fn sample_fcn_weights(cfg: &NetworkConfig, seed: &RngSeed, up_to: usize) -> Result<NetworkWeights> {
    let widths = fcn_widths(cfg)?;
    if up_to == 0 || up_to >= widths.len() {
        return Err(Error::invalid(format!("layer {up_to} outside 1..={}", widths.len() - 1)));
    }
    let mut layers = Vec::with_capacity(up_to);
    let mut biases = Vec::with_capacity(up_to);
    for l in 1..=up_to {
        let mut rng = seed.child(l as u64).rng();
        layers.push(sample_layer(&cfg.layers[l - 1], widths[l], widths[l - 1], &mut rng)?);
        biases.push(sample_bias(widths[l], cfg.sigma_b2, &mut rng));
    }
    Ok(NetworkWeights { layers, biases })
}

/// `h^(1), ..., h^(m)` for the `m` layers present in `weights`.
pub fn forward_fcn(cfg: &NetworkConfig, weights: &NetworkWeights, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let widths = fcn_widths(cfg)?;
    if weights.layers.len() != weights.biases.len() || weights.layers.len() >= widths.len() {
        return Err(Error::mismatch(format!(
            "{} weight layers and {} bias vectors for a network with {} layers",
            weights.layers.len(),
            weights.biases.len(),
            widths.len() - 1
        )));
    }
    if x.len() != widths[0] {
        return Err(Error::mismatch(format!("input has dimension {}, expected {}", x.len(), widths[0])));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(weights.layers.len());
    for (l, (w, b)) in weights.layers.iter().zip(&weights.biases).enumerate() {
        if w.rows() != widths[l + 1] || w.cols() != widths[l] || b.len() != widths[l + 1] {
            return Err(Error::mismatch(format!(
                "layer {} has weights {}x{} and {} biases, expected {}x{}",
                l + 1,
                w.rows(),
                w.cols(),
                b.len(),
                widths[l + 1],
                widths[l]
            )));
        }
        let z: Vec<f64> = match out.last() {
            None => x.to_vec(),
            Some(h) => h.iter().map(|&v| cfg.activation.eval(v)).collect(),
        };
        let mut h = w.apply(&z);
        for (v, bi) in h.iter_mut().zip(b) {
            *v += bi;
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: l + 1 });
        }
        out.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Activation;
    use crate::weights::SamplerSpec;
    use nalgebra::DMatrix;

    fn cfg(widths: Vec<usize>, act: Activation) -> NetworkConfig {
        NetworkConfig::fcn(widths, act, 0.0, SamplerSpec::iid_gaussian(1.0)).unwrap()
    }

    #[test]
    fn identity_network_passes_input_through() {
        let c = cfg(vec![3, 3, 3, 3], Activation::IDENTITY);
        let eye = || LayerWeights::Dense(DMatrix::identity(3, 3));
        let w = NetworkWeights { layers: vec![eye(), eye(), eye()], biases: vec![vec![0.0; 3]; 3] };
        let hs = forward_fcn(&c, &w, &[0.5, -1.0, 2.0]).unwrap();
        assert!(hs.iter().all(|h| h == &vec![0.5, -1.0, 2.0]));
    }

    #[test]
    fn zero_input_gives_zero() {
        let c = cfg(vec![4, 6, 6, 2], Activation::TANH);
        let w = sample_fcn_weights(&c, &RngSeed::new(1), 3).unwrap();
        let hs = forward_fcn(&c, &w, &[0.0; 4]).unwrap();
        assert!(hs.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_evaluated_two_layer_net() {
        let c = cfg(vec![2, 2, 1], Activation::TANH);
        let w = NetworkWeights::from_dense(
            vec![
                WeightMatrix::from_matrix(DMatrix::identity(2, 2)),
                WeightMatrix::from_matrix(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])),
            ],
            vec![vec![0.0; 2], vec![0.0]],
        );
        let hs = forward_fcn(&c, &w, &[1.0, 0.0]).unwrap();
        assert!((hs[1][0] - 0.7615941559557649).abs() < 1e-15);
    }

    #[test]
    fn weights_are_prefix_stable_and_shapes_checked() {
        let c = cfg(vec![3, 5, 5, 2], Activation::RELU);
        let seed = RngSeed::new(9);
        let a = sample_fcn_weights(&c, &seed, 1).unwrap();
        let b = sample_fcn_weights(&c, &seed, 3).unwrap();
        assert_eq!(a.layers[0].to_dense(), b.layers[0].to_dense());
        assert!(forward_fcn(&c, &b, &[1.0, 2.0]).is_err());
        assert!(sample_fcn_weights(&c, &seed, 4).is_err());
        let bad = NetworkWeights { layers: vec![LayerWeights::Dense(DMatrix::zeros(4, 3))], biases: vec![vec![0.0; 4]] };
        assert!(forward_fcn(&c, &bad, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn overflow_is_reported_with_layer() {
        let c = cfg(vec![1, 1, 1], Activation::IDENTITY);
        let w = NetworkWeights {
            layers: vec![LayerWeights::Dense(DMatrix::from_element(1, 1, 1e300)); 2],
            biases: vec![vec![0.0]; 2],
        };
        assert!(matches!(forward_fcn(&c, &w, &[1.0]), Err(Error::NonFinite { layer: 2 })));
    }
}
