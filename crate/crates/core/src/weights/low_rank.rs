use nalgebra::DMatrix;
use rand::Rng;

use super::{check_dims, check_sigma, BaseDist, Family, HouseholderFrame, SamplerSpec, SizeSpec, WeightMatrix, WeightMeta};
use crate::rng::RngSeed;
use crate::{Error, Result};

/// Variance of the coefficient block so that `E[A_ij^2] = sigma_w2 / n`.
pub(crate) fn coefficient_variance(m: usize, n: usize, r: usize, sigma_w2: f64) -> f64 {
    sigma_w2 * m as f64 / (r as f64 * n as f64)
}

pub(crate) fn check_rank(m: usize, r: usize) -> Result<()> {
    if r == 0 || r > m {
        return Err(Error::invalid(format!("rank {r} outside [1, {m}]")));
    }
    Ok(())
}

/// Factors `(C, P)` of a low-rank draw: `C` a Haar `m x r` frame, `P` an
/// `r x n` iid block.
pub(crate) fn low_rank_factors<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    r: usize,
    sigma_w2: f64,
    base: BaseDist,
    rng: &mut R,
) -> (HouseholderFrame, DMatrix<f64>) {
    let basis = HouseholderFrame::sample(m, r, rng);
    let s = coefficient_variance(m, n, r, sigma_w2);
    let data: Vec<f64> = (0..r * n).map(|_| base.draw(s, rng)).collect();
    (basis, DMatrix::from_row_slice(r, n, &data))
}

/// Sample `A = C P` with `C` a uniformly random orthonormal `m x r` basis and
/// `P` iid with variance `sigma_w2 * m / (r * n)`.
pub fn sample_low_rank(
    m: usize,
    n: usize,
    r: usize,
    sigma_w2: f64,
    base_dist: BaseDist,
    seed: &RngSeed,
) -> Result<WeightMatrix> {
    check_dims(m, n)?;
    check_sigma(sigma_w2)?;
    check_rank(m, r)?;
    let mut rng = seed.rng();
    let (basis, coeffs) = low_rank_factors(m, n, r, sigma_w2, base_dist, &mut rng);
    let spec = SamplerSpec::new(Family::LowRank { rank: SizeSpec::Absolute(r) }, sigma_w2).with_base(base_dist);
    Ok(WeightMatrix {
        entries: basis.to_dense() * coeffs,
        meta: Some(WeightMeta { spec, seed: seed.clone() }),
    })
}
