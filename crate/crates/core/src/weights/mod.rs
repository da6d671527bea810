//! Seeded samplers for iid, orthogonal, low-rank, block-sparse and
//! orthogonal-convolution weight families.
//!
//! Every dense family is normalised so that `E[W_ij^2] = sigma_w2 / n` for an
//! `m x n` matrix. Structured families come in two forms: a dense
//! [`WeightMatrix`] for inspection and export, and a factored
//! [`LayerWeights`] that Monte-Carlo code can apply in `O(mn)` without ever
//! forming an `O(n^3)` orthogonal factor.

mod block_sparse;
mod conv;
mod export;
mod householder;
mod iid;
mod layer;
mod low_rank;
mod orthogonal;

pub use block_sparse::{block_mask_nonzeros, sample_block_sparse};
pub use conv::{
    sample_conv_layer, sample_orthogonal_conv, sample_orthogonal_conv_rows, ConvFilterBank,
    ConvWeights,
};
pub(crate) use export::fmt_f64;
pub use export::{export_mask, import_mask, read_triplets, write_triplets, Triplet};
pub use householder::HouseholderFrame;
pub use iid::sample_iid;
pub use layer::{sample_bias, sample_layer, LayerWeights, WeightSampler};
pub use low_rank::sample_low_rank;
pub use orthogonal::sample_orthogonal;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::RngSeed;
use crate::{Error, Result};

/// Distribution of the free entries of the low-rank and block-sparse
/// constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseDist {
    #[default]
    Gaussian,
    Uniform,
}

impl BaseDist {
    /// Draw a centred value with the given variance.
    pub fn draw<R: Rng + ?Sized>(self, variance: f64, rng: &mut R) -> f64 {
        match self {
            BaseDist::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                variance.sqrt() * z
            }
            BaseDist::Uniform => {
                let a = (3.0 * variance).sqrt();
                rng.random_range(-a..=a)
            }
        }
    }
}

/// A rank or block side given either as an absolute count or as a fraction
/// of a reference dimension (resolved as `ceil(fraction * dim)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    Absolute(usize),
    Fraction { fraction: f64 },
}

impl SizeSpec {
    pub fn resolve(self, dim: usize) -> Result<usize> {
        match self {
            SizeSpec::Absolute(v) => Ok(v),
            SizeSpec::Fraction { fraction } => {
                if !(fraction > 0.0 && fraction <= 1.0) {
                    return Err(Error::invalid(format!("size fraction {fraction} outside (0, 1]")));
                }
                Ok(((fraction * dim as f64).ceil() as usize).max(1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    IidGaussian,
    IidUniform,
    /// Gaussian entries zeroed with probability `p`, survivors rescaled by
    /// `1 / (1 - p)` in variance.
    IidDropout { p: f64 },
    /// Heavy-tailed negative control with no finite variance.
    IidCauchy,
    HaarOrthogonal,
    LowRank { rank: SizeSpec },
    BlockSparse { block: SizeSpec },
    /// Tall reshaped kernel with orthogonal columns.
    OrthogonalConv,
    /// Wide reshaped kernel with orthogonal rows (the transpose construction).
    OrthogonalConvRows,
}

impl Family {
    pub fn is_control(&self) -> bool {
        matches!(self, Family::IidCauchy)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::IidGaussian => "iid_gaussian",
            Family::IidUniform => "iid_uniform",
            Family::IidDropout { .. } => "iid_dropout",
            Family::IidCauchy => "iid_cauchy",
            Family::HaarOrthogonal => "haar_orthogonal",
            Family::LowRank { .. } => "low_rank",
            Family::BlockSparse { .. } => "block_sparse",
            Family::OrthogonalConv => "orthogonal_conv",
            Family::OrthogonalConvRows => "orthogonal_conv_rows",
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(
            self,
            Family::IidGaussian | Family::IidUniform | Family::IidDropout { .. } | Family::IidCauchy
        )
    }
}

/// Declarative description of one weight distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub family: Family,
    pub sigma_w2: f64,
    #[serde(default)]
    pub sigma_b2: f64,
    #[serde(default)]
    pub base_dist: BaseDist,
}

impl SamplerSpec {
    pub fn new(family: Family, sigma_w2: f64) -> Self {
        SamplerSpec { family, sigma_w2, sigma_b2: 0.0, base_dist: BaseDist::Gaussian }
    }

    pub fn with_bias(mut self, sigma_b2: f64) -> Self {
        self.sigma_b2 = sigma_b2;
        self
    }

    pub fn with_base(mut self, base_dist: BaseDist) -> Self {
        self.base_dist = base_dist;
        self
    }

    pub fn iid_gaussian(sigma_w2: f64) -> Self {
        Self::new(Family::IidGaussian, sigma_w2)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_w2.is_finite() || self.sigma_w2 <= 0.0 {
            return Err(Error::invalid(format!("sigma_w2 must be positive, got {}", self.sigma_w2)));
        }
        if !self.sigma_b2.is_finite() || self.sigma_b2 < 0.0 {
            return Err(Error::invalid(format!("sigma_b2 must be non-negative, got {}", self.sigma_b2)));
        }
        if let Family::IidDropout { p } = self.family {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(format!("dropout probability {p} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMeta {
    pub spec: SamplerSpec,
    pub seed: RngSeed,
}

/// A realised dense `m x n` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub entries: DMatrix<f64>,
    pub meta: Option<WeightMeta>,
}

impl WeightMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        WeightMatrix { entries, meta: None }
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().filter(|v| **v != 0.0).count()
    }

    pub fn mean_square(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>() / (self.m() * self.n()) as f64
    }
}

pub(crate) fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!("matrix dimensions must be positive, got {m}x{n}")));
    }
    Ok(())
}

pub(crate) fn check_sigma(sigma_w2: f64) -> Result<()> {
    if !sigma_w2.is_finite() || sigma_w2 <= 0.0 {
        return Err(Error::invalid(format!("sigma_w2 must be positive, got {sigma_w2}")));
    }
    Ok(())
}
