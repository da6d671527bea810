use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::block_sparse::{block_sparse_matrix, check_block};
use super::iid::iid_matrix;
use super::low_rank::{check_rank, low_rank_factors};
use super::{check_dims, Family, HouseholderFrame, SamplerSpec};
use crate::rng::SimRng;
use crate::{Error, Result};

/// One realised layer in whichever representation is cheapest to apply.
#[derive(Debug, Clone)]
pub enum LayerWeights {
    Dense(DMatrix<f64>),
    /// `scale * F` with `F` square Haar.
    Orthogonal { frame: HouseholderFrame, scale: f64 },
    /// `C P` with `C` an `m x r` Haar frame.
    LowRank { basis: HouseholderFrame, coeffs: DMatrix<f64> },
}

impl LayerWeights {
    pub fn rows(&self) -> usize {
        match self {
            LayerWeights::Dense(d) => d.nrows(),
            LayerWeights::Orthogonal { frame, .. } => frame.dim(),
            LayerWeights::LowRank { basis, .. } => basis.dim(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LayerWeights::Dense(d) => d.ncols(),
            LayerWeights::Orthogonal { frame, .. } => frame.cols(),
            LayerWeights::LowRank { coeffs, .. } => coeffs.ncols(),
        }
    }

    /// `W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LayerWeights::Dense(d) => {
                let mut out = DVector::zeros(d.nrows());
                out.gemv(1.0, d, &DVector::from_column_slice(x), 0.0);
                out.data.into()
            }
            LayerWeights::Orthogonal { frame, scale } => {
                let mut y = frame.apply(x);
                y.iter_mut().for_each(|v| *v *= scale);
                y
            }
            LayerWeights::LowRank { basis, coeffs } => {
                let mut p = DVector::zeros(coeffs.nrows());
                p.gemv(1.0, coeffs, &DVector::from_column_slice(x), 0.0);
                basis.apply(p.as_slice())
            }
        }
    }

    /// `W^T y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LayerWeights::Dense(d) => {
                let mut out = DVector::zeros(d.ncols());
                out.gemv_tr(1.0, d, &DVector::from_column_slice(y), 0.0);
                out.data.into()
            }
            LayerWeights::Orthogonal { frame, scale } => {
                let mut x = frame.apply_transpose(y);
                x.iter_mut().for_each(|v| *v *= scale);
                x
            }
            LayerWeights::LowRank { basis, coeffs } => {
                let c = basis.apply_transpose(y);
                let mut out = DVector::zeros(coeffs.ncols());
                out.gemv_tr(1.0, coeffs, &DVector::from_vec(c), 0.0);
                out.data.into()
            }
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        match self {
            LayerWeights::Dense(d) => d.row(i).iter().copied().collect(),
            _ => {
                let mut e = vec![0.0; self.rows()];
                e[i] = 1.0;
                self.apply_transpose(&e)
            }
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        match self {
            LayerWeights::Dense(d) => d.column(j).iter().copied().collect(),
            _ => {
                let mut e = vec![0.0; self.cols()];
                e[j] = 1.0;
                self.apply(&e)
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LayerWeights::Dense(d) => d.clone(),
            LayerWeights::Orthogonal { frame, scale } => frame.to_dense() * *scale,
            LayerWeights::LowRank { basis, coeffs } => basis.to_dense() * coeffs,
        }
    }
}

/// Anything that can produce random `m x n` layers: the built-in families
/// and ad-hoc controls used by the regime checks.
pub trait WeightSampler: Sync {
    /// The `sigma^2` of the `E[W_ij^2] = sigma^2 / n` normalisation the
    /// sampler claims (or is tested against).
    fn sigma_w2(&self) -> f64;

    fn label(&self) -> String;

    fn sample(&self, m: usize, n: usize, rng: &mut SimRng) -> Result<LayerWeights>;
}

impl WeightSampler for SamplerSpec {
    fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    fn label(&self) -> String {
        self.family.name().to_string()
    }

    fn sample(&self, m: usize, n: usize, rng: &mut SimRng) -> Result<LayerWeights> {
        sample_layer(self, m, n, rng)
    }
}

/// Draw one `m x n` layer from `spec`, factored where that is cheaper.
pub fn sample_layer(spec: &SamplerSpec, m: usize, n: usize, rng: &mut SimRng) -> Result<LayerWeights> {
    check_dims(m, n)?;
    spec.validate()?;
    match spec.family {
        f if f.is_iid() => Ok(LayerWeights::Dense(iid_matrix(m, n, spec, rng))),
        Family::HaarOrthogonal => {
            if m != n {
                return Err(Error::invalid(format!("orthogonal layers must be square, got {m}x{n}")));
            }
            Ok(LayerWeights::Orthogonal {
                frame: HouseholderFrame::sample(n, n, rng),
                scale: spec.sigma_w2.sqrt(),
            })
        }
        Family::LowRank { rank } => {
            let r = rank.resolve(m)?;
            check_rank(m, r)?;
            let (basis, coeffs) = low_rank_factors(m, n, r, spec.sigma_w2, spec.base_dist, rng);
            Ok(LayerWeights::LowRank { basis, coeffs })
        }
        Family::BlockSparse { block } => {
            let b = block.resolve(m.min(n))?;
            check_block(m, n, b)?;
            Ok(LayerWeights::Dense(block_sparse_matrix(m, n, b, spec.sigma_w2, spec.base_dist, rng)))
        }
        Family::OrthogonalConv | Family::OrthogonalConvRows => Err(Error::invalid(
            "convolutional families cannot fill a dense layer".to_string(),
        )),
        _ => unreachable!(),
    }
}

/// iid `N(0, sigma_b2)` biases.
pub fn sample_bias(len: usize, sigma_b2: f64, rng: &mut SimRng) -> Vec<f64> {
    if sigma_b2 == 0.0 {
        return vec![0.0; len];
    }
    let s = sigma_b2.sqrt();
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            s * z
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::weights::SizeSpec;

    fn families() -> Vec<SamplerSpec> {
        vec![
            SamplerSpec::new(Family::IidGaussian, 2.0),
            SamplerSpec::new(Family::IidUniform, 2.0),
            SamplerSpec::new(Family::IidDropout { p: 0.5 }, 2.0),
            SamplerSpec::new(Family::HaarOrthogonal, 2.0),
            SamplerSpec::new(Family::LowRank { rank: SizeSpec::Fraction { fraction: 0.5 } }, 2.0),
            SamplerSpec::new(Family::BlockSparse { block: SizeSpec::Fraction { fraction: 0.2 } }, 2.0),
        ]
    }

    #[test]
    fn factored_apply_matches_dense() {
        for spec in families() {
            let w = sample_layer(&spec, 11, 11, &mut RngSeed::new(1).rng()).unwrap();
            let d = w.to_dense();
            let x: Vec<f64> = (0..11).map(|i| (i as f64 * 0.7).sin()).collect();
            let got = w.apply(&x);
            let want = &d * DVector::from_vec(x.clone());
            let got_t = w.apply_transpose(&x);
            let want_t = d.transpose() * DVector::from_vec(x.clone());
            for i in 0..11 {
                assert!((got[i] - want[i]).abs() < 1e-12, "{}", spec.family.name());
                assert!((got_t[i] - want_t[i]).abs() < 1e-12, "{}", spec.family.name());
            }
            assert_eq!(w.row(3).len(), 11);
            assert!((w.column(2)[4] - d[(4, 2)]).abs() < 1e-12);
            assert!((w.row(4)[2] - d[(4, 2)]).abs() < 1e-12);
        }
    }

    #[test]
    fn rectangular_orthogonal_rejected() {
        let spec = SamplerSpec::new(Family::HaarOrthogonal, 1.0);
        assert!(sample_layer(&spec, 3, 4, &mut RngSeed::new(0).rng()).is_err());
    }
}
