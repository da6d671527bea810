use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_dims, check_sigma, BaseDist, Family, SamplerSpec, SizeSpec, WeightMatrix, WeightMeta};
use crate::rng::RngSeed;
use crate::{Error, Result};

/// Support size of the block-diagonal mask with square blocks of side `b`,
/// the last block truncated at `min(m, n)`.
pub fn block_mask_nonzeros(m: usize, n: usize, b: usize) -> usize {
    let d = m.min(n);
    let mut total = 0;
    let mut start = 0;
    while start < d {
        let rows = (start + b).min(m) - start;
        let cols = (start + b).min(n) - start;
        total += rows * cols;
        start += b;
    }
    total
}

pub(crate) fn check_block(m: usize, n: usize, b: usize) -> Result<()> {
    if b == 0 || b > m.min(n) {
        return Err(Error::invalid(format!("block side {b} outside [1, {}]", m.min(n))));
    }
    Ok(())
}

pub(crate) fn block_sparse_matrix<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    b: usize,
    sigma_w2: f64,
    base: BaseDist,
    rng: &mut R,
) -> DMatrix<f64> {
    let density = block_mask_nonzeros(m, n, b) as f64 / (m * n) as f64;
    let var = sigma_w2 / (n as f64 * density);
    let mut row_perm: Vec<usize> = (0..m).collect();
    let mut col_perm: Vec<usize> = (0..n).collect();
    row_perm.shuffle(rng);
    col_perm.shuffle(rng);
    let mut out = DMatrix::zeros(m, n);
    let d = m.min(n);
    let mut start = 0;
    while start < d {
        for i in start..(start + b).min(m) {
            for j in start..(start + b).min(n) {
                out[(row_perm[i], col_perm[j])] = base.draw(var, rng);
            }
        }
        start += b;
    }
    out
}

/// Sample `P_m (A ⊙ B) P_n`: a block-diagonal mask `B` with blocks of side
/// `b`, iid on-support entries with variance `sigma_w2 / (n * density)`, and
/// uniformly random row and column permutations.
pub fn sample_block_sparse(
    m: usize,
    n: usize,
    b: usize,
    sigma_w2: f64,
    base_dist: BaseDist,
    seed: &RngSeed,
) -> Result<WeightMatrix> {
    check_dims(m, n)?;
    check_sigma(sigma_w2)?;
    check_block(m, n, b)?;
    let mut rng = seed.rng();
    let spec = SamplerSpec::new(Family::BlockSparse { block: SizeSpec::Absolute(b) }, sigma_w2).with_base(base_dist);
    Ok(WeightMatrix {
        entries: block_sparse_matrix(m, n, b, sigma_w2, base_dist, &mut rng),
        meta: Some(WeightMeta { spec, seed: seed.clone() }),
    })
}
