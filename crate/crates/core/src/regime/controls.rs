//! Synthetic weight laws that violate one condition on purpose.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::weights::{sample_conv_layer, ConvWeights, LayerWeights, SamplerSpec, WeightSampler};
use crate::{Error, Result};

/// Negative controls for the matrix conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    /// Every entry equals `sigma / sqrt(n)`: not centred.
    AllOnes { sigma_w2: f64 },
    /// iid Gaussian except the first row, which is zero: not exchangeable.
    ZeroFirstRow { sigma_w2: f64 },
    /// Each row repeats one `N(0, sigma^2 / n)` draw: unbounded projected
    /// eighth moment.
    IdenticalCoordinates { sigma_w2: f64 },
    /// Each row is a Gaussian random walk with `N(0, sigma^2 / n)` steps.
    Autoregressive { sigma_w2: f64 },
}

impl WeightSampler for Control {
    fn sigma_w2(&self) -> f64 {
        match *self {
            Control::AllOnes { sigma_w2 }
            | Control::ZeroFirstRow { sigma_w2 }
            | Control::IdenticalCoordinates { sigma_w2 }
            | Control::Autoregressive { sigma_w2 } => sigma_w2,
        }
    }

    fn label(&self) -> String {
        match self {
            Control::AllOnes { .. } => "all_ones",
            Control::ZeroFirstRow { .. } => "zero_first_row",
            Control::IdenticalCoordinates { .. } => "identical_coordinates",
            Control::Autoregressive { .. } => "autoregressive",
        }
        .to_string()
    }

    fn sample(&self, m: usize, n: usize, rng: &mut SimRng) -> Result<LayerWeights> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        let sd = (self.sigma_w2() / n as f64).sqrt();
        let mut w = DMatrix::zeros(m, n);
        match self {
            Control::AllOnes { .. } => w.fill(sd),
            Control::ZeroFirstRow { .. } => {
                for i in 1..m {
                    for j in 0..n {
                        w[(i, j)] = sd * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            Control::IdenticalCoordinates { .. } => {
                for i in 0..m {
                    let x = sd * rng.sample::<f64, _>(StandardNormal);
                    w.row_mut(i).fill(x);
                }
            }
            Control::Autoregressive { .. } => {
                for i in 0..m {
                    let mut x = 0.0;
                    for j in 0..n {
                        x += sd * rng.sample::<f64, _>(StandardNormal);
                        w[(i, j)] = x;
                    }
                }
            }
        }
        Ok(LayerWeights::Dense(w))
    }
}

/// Draws `c_out x c_in x k x k` convolution kernels.
pub trait ConvSampler: Sync {
    fn sigma_w2(&self) -> f64;
    fn label(&self) -> String;
    fn sample(&self, c_out: usize, c_in: usize, k: usize, rng: &mut SimRng) -> Result<ConvWeights>;
}

impl ConvSampler for SamplerSpec {
    fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    fn label(&self) -> String {
        self.family.name().to_string()
    }

    fn sample(&self, c_out: usize, c_in: usize, k: usize, rng: &mut SimRng) -> Result<ConvWeights> {
        sample_conv_layer(self, c_out, c_in, k, rng)
    }
}

/// iid Gaussian filters copied across all input channels:
/// `U[i, j, mu] = V[i, mu]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedFilterControl {
    pub sigma_w2: f64,
}

impl ConvSampler for SharedFilterControl {
    fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    fn label(&self) -> String {
        "shared_filters".to_string()
    }

    fn sample(&self, c_out: usize, c_in: usize, k: usize, rng: &mut SimRng) -> Result<ConvWeights> {
        let kk = k * k;
        let sd = (self.sigma_w2 / c_in as f64).sqrt();
        let mut u = DMatrix::zeros(c_out, kk * c_in);
        for i in 0..c_out {
            for mu in 0..kk {
                let v = sd * rng.sample::<f64, _>(StandardNormal);
                for j in 0..c_in {
                    u[(i, j * kk + mu)] = v;
                }
            }
        }
        Ok(ConvWeights::Dense { unfolded: u, c_in, k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn control_shapes() {
        let mut rng = RngSeed::new(1).rng();
        let w = Control::IdenticalCoordinates { sigma_w2: 1.0 }.sample(3, 5, &mut rng).unwrap().to_dense();
        assert!(w.row(1).iter().all(|&v| v == w[(1, 0)]));
        let w = Control::ZeroFirstRow { sigma_w2: 1.0 }.sample(3, 5, &mut rng).unwrap().to_dense();
        assert!(w.row(0).iter().all(|&v| v == 0.0) && w[(1, 0)] != 0.0);
        let w = Control::AllOnes { sigma_w2: 4.0 }.sample(2, 4, &mut rng).unwrap().to_dense();
        assert!(w.iter().all(|&v| v == 1.0));
        let u = SharedFilterControl { sigma_w2: 1.0 }.sample(2, 3, 3, &mut rng).unwrap().to_bank();
        assert_eq!(u.get(1, 0, 4), u.get(1, 2, 4));
    }
}
