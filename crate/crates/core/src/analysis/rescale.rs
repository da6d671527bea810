use serde::{Deserialize, Serialize};

use crate::weights::{block_mask_nonzeros, Family};
use crate::{Error, Result};

/// Layer structure relevant to variance bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectiveFamily {
    Dense,
    /// Block-sparse with mask density `density`.
    Sparse { density: f64 },
    /// Low-rank with `rank / m = fraction`.
    LowRank { fraction: f64 },
}

impl EffectiveFamily {
    /// Resolve a sampler family on an `m x n` layer.
    pub fn from_family(family: &Family, m: usize, n: usize) -> Result<Self> {
        Ok(match *family {
            Family::BlockSparse { block } => {
                let b = block.resolve(m.min(n))?;
                EffectiveFamily::Sparse { density: block_mask_nonzeros(m, n, b) as f64 / (m * n) as f64 }
            }
            Family::LowRank { rank } => EffectiveFamily::LowRank { fraction: rank.resolve(m)? as f64 / m as f64 },
            _ => EffectiveFamily::Dense,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveVariance {
    pub family: EffectiveFamily,
    pub sigma_w2: f64,
    /// `sigma_w2` a dense layer needs to propagate signals identically.
    pub effective_sigma_w2: f64,
    /// Variance parameter of the realised nonzero entries (sparse) or
    /// coefficient entries (low-rank); divide by `n` for the entry variance.
    pub unnormalized_sigma_w2: f64,
}

impl EffectiveVariance {
    pub fn entry_variance(&self, n: usize) -> f64 {
        self.unnormalized_sigma_w2 / n as f64
    }
}

/// Every sampler already targets `E[W_ij^2] = sigma_w2 / n`, so the effective
/// dense variance is `sigma_w2` itself; the realising variance is inflated by
/// `1 / density` or `m / r`.
pub fn effective_variance(sigma_w2: f64, family: EffectiveFamily) -> Result<EffectiveVariance> {
    if !(sigma_w2.is_finite() && sigma_w2 > 0.0) {
        return Err(Error::invalid(format!("sigma_w2 must be positive, got {sigma_w2}")));
    }
    let factor = match family {
        EffectiveFamily::Dense => 1.0,
        EffectiveFamily::Sparse { density: f } | EffectiveFamily::LowRank { fraction: f } => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("density or rank fraction {f} outside (0, 1]")));
            }
            1.0 / f
        }
    };
    Ok(EffectiveVariance { family, sigma_w2, effective_sigma_w2: sigma_w2, unnormalized_sigma_w2: sigma_w2 * factor })
}
