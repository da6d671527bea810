use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::iid::draw_iid_entry;
use super::layer::sample_layer;
use super::{check_sigma, Family, HouseholderFrame, SamplerSpec};
use crate::rng::{RngSeed, SimRng};
use crate::{Error, Result};

/// `c_out x c_in x k x k` filters stored row-major, so the flat buffer is
/// also the reshaped `c_out x (k^2 c_in)` matrix with
/// `U[i, j, mu] = Ũ[i, j * k^2 + mu]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvFilterBank {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    pub entries: Vec<f64>,
    /// `c_in * E[U^2]` realised by the construction, when known.
    pub implied_sigma_w2: Option<f64>,
}

impl ConvFilterBank {
    pub fn zeros(c_out: usize, c_in: usize, k: usize) -> Self {
        ConvFilterBank { c_out, c_in, k, entries: vec![0.0; c_out * c_in * k * k], implied_sigma_w2: None }
    }

    pub fn patch_len(&self) -> usize {
        self.c_in * self.k * self.k
    }

    /// `U[i, j, mu]`, `mu` the row-major position inside the `k x k` window.
    pub fn get(&self, i: usize, j: usize, mu: usize) -> f64 {
        self.entries[i * self.patch_len() + j * self.k * self.k + mu]
    }

    pub fn set(&mut self, i: usize, j: usize, mu: usize, v: f64) {
        let idx = i * self.patch_len() + j * self.k * self.k + mu;
        self.entries[idx] = v;
    }

    /// The reshaped matrix Ũ.
    pub fn unfolded(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.c_out, self.patch_len(), &self.entries)
    }

    pub fn from_unfolded(u: &DMatrix<f64>, c_in: usize, k: usize) -> Self {
        let c_out = u.nrows();
        let mut entries = Vec::with_capacity(u.len());
        for i in 0..c_out {
            entries.extend(u.row(i).iter());
        }
        ConvFilterBank { c_out, c_in, k, entries, implied_sigma_w2: None }
    }
}

pub(crate) fn check_odd(k: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::invalid(format!("filter side k = {k} must be odd")));
    }
    Ok(())
}

/// Realised filters in the representation used by the convolution.
#[derive(Debug, Clone)]
pub enum ConvWeights {
    Dense { unfolded: DMatrix<f64>, c_in: usize, k: usize },
    /// Ũ = scale * F with F a tall Haar frame (`c_out x k^2 c_in`).
    Columns { frame: HouseholderFrame, scale: f64, c_in: usize, k: usize },
    /// Ũ = scale * F^T with F a tall Haar frame (`k^2 c_in x c_out`).
    Rows { frame: HouseholderFrame, scale: f64, c_in: usize, k: usize },
}

impl ConvWeights {
    pub fn c_out(&self) -> usize {
        match self {
            ConvWeights::Dense { unfolded, .. } => unfolded.nrows(),
            ConvWeights::Columns { frame, .. } => frame.dim(),
            ConvWeights::Rows { frame, .. } => frame.cols(),
        }
    }

    pub fn c_in(&self) -> usize {
        match self {
            ConvWeights::Dense { c_in, .. } | ConvWeights::Columns { c_in, .. } | ConvWeights::Rows { c_in, .. } => *c_in,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ConvWeights::Dense { k, .. } | ConvWeights::Columns { k, .. } | ConvWeights::Rows { k, .. } => *k,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.c_in() * self.k() * self.k()
    }

    /// Ũ X̃ for unfolded patches `X̃` (`k^2 c_in x d`).
    pub fn apply_patches(&self, patches: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            ConvWeights::Dense { unfolded, .. } => unfolded * patches,
            ConvWeights::Columns { frame, scale, .. } => {
                let mut out = DMatrix::zeros(frame.dim(), patches.ncols());
                for (c, col) in patches.column_iter().enumerate() {
                    let y = frame.apply(col.as_slice());
                    for (r, v) in y.into_iter().enumerate() {
                        out[(r, c)] = scale * v;
                    }
                }
                out
            }
            ConvWeights::Rows { frame, scale, .. } => {
                let mut out = DMatrix::zeros(frame.cols(), patches.ncols());
                for (c, col) in patches.column_iter().enumerate() {
                    let y = frame.apply_transpose(col.as_slice());
                    for (r, v) in y.into_iter().enumerate() {
                        out[(r, c)] = scale * v;
                    }
                }
                out
            }
        }
    }

    /// Row `i` of Ũ: all filters feeding output channel `i`.
    pub fn unfolded_row(&self, i: usize) -> Vec<f64> {
        match self {
            ConvWeights::Dense { unfolded, .. } => unfolded.row(i).iter().copied().collect(),
            ConvWeights::Columns { frame, scale, .. } => frame.row(i).into_iter().map(|v| v * scale).collect(),
            ConvWeights::Rows { frame, scale, .. } => frame.column(i).into_iter().map(|v| v * scale).collect(),
        }
    }

    /// Column `c` of Ũ, i.e. `U[:, c / k^2, c % k^2]`.
    pub fn unfolded_column(&self, c: usize) -> Vec<f64> {
        match self {
            ConvWeights::Dense { unfolded, .. } => unfolded.column(c).iter().copied().collect(),
            ConvWeights::Columns { frame, scale, .. } => frame.column(c).into_iter().map(|v| v * scale).collect(),
            ConvWeights::Rows { frame, scale, .. } => frame.row(c).into_iter().map(|v| v * scale).collect(),
        }
    }

    pub fn to_bank(&self) -> ConvFilterBank {
        let u = match self {
            ConvWeights::Dense { unfolded, .. } => unfolded.clone(),
            ConvWeights::Columns { frame, scale, .. } => frame.to_dense() * *scale,
            ConvWeights::Rows { frame, scale, .. } => frame.to_dense().transpose() * *scale,
        };
        ConvFilterBank::from_unfolded(&u, self.c_in(), self.k())
    }
}

/// Draw one convolution layer whose filter entries have variance
/// `sigma_w2 / c_in`.
///
/// `OrthogonalConv` uses orthogonal columns when `c_out >= k^2 c_in` and
/// falls back to orthogonal rows otherwise; matrix families are applied to
/// the reshaped `c_out x k^2 c_in` kernel.
pub fn sample_conv_layer(spec: &SamplerSpec, c_out: usize, c_in: usize, k: usize, rng: &mut SimRng) -> Result<ConvWeights> {
    check_odd(k)?;
    spec.validate()?;
    if c_out == 0 || c_in == 0 {
        return Err(Error::invalid("channel counts must be positive"));
    }
    let cols = k * k * c_in;
    let sigma = spec.sigma_w2.sqrt();
    match spec.family {
        f if f.is_iid() => {
            let data: Vec<f64> = (0..c_out * cols).map(|_| draw_iid_entry(&f, spec.sigma_w2, c_in, rng)).collect();
            Ok(ConvWeights::Dense { unfolded: DMatrix::from_row_slice(c_out, cols, &data), c_in, k })
        }
        Family::OrthogonalConv if c_out >= cols => Ok(ConvWeights::Columns {
            frame: HouseholderFrame::sample(c_out, cols, rng),
            scale: sigma * (c_out as f64 / c_in as f64).sqrt(),
            c_in,
            k,
        }),
        Family::OrthogonalConv | Family::OrthogonalConvRows => {
            if c_out > cols {
                return Err(Error::invalid(format!("orthogonal rows need c_out <= k^2 c_in, got {c_out} > {cols}")));
            }
            Ok(ConvWeights::Rows { frame: HouseholderFrame::sample(cols, c_out, rng), scale: sigma * k as f64, c_in, k })
        }
        _ => {
            // Matrix sampler normalises by its column count k^2 c_in.
            let matrix_spec = SamplerSpec { sigma_w2: spec.sigma_w2 * (k * k) as f64, ..spec.clone() };
            let w = sample_layer(&matrix_spec, c_out, cols, rng)?;
            Ok(ConvWeights::Dense { unfolded: w.to_dense(), c_in, k })
        }
    }
}

/// Orthogonal filters with `Ũ^T Ũ = I / k^2`: the first `k^2 c_in` columns of
/// a Haar `c_out x c_out` matrix, scaled by `1 / k`.
///
/// With `rescale_to = Some(s2)` the entries are rescaled so that
/// `c_in * E[U^2] = s2`; otherwise the implied value `c_in / (k^2 c_out)` is
/// recorded in the bank.
pub fn sample_orthogonal_conv(
    c_out: usize,
    c_in: usize,
    k: usize,
    seed: &RngSeed,
    rescale_to: Option<f64>,
) -> Result<ConvFilterBank> {
    check_odd(k)?;
    if c_in == 0 {
        return Err(Error::invalid("c_in must be positive"));
    }
    let cols = k * k * c_in;
    if c_out < cols {
        return Err(Error::invalid(format!(
            "orthogonal columns need c_out >= k^2 c_in, got {c_out} < {cols}; use the transposed (orthogonal rows) construction"
        )));
    }
    let frame = HouseholderFrame::sample(c_out, cols, &mut seed.rng());
    let (scale, implied) = match rescale_to {
        Some(s2) => {
            check_sigma(s2)?;
            (s2.sqrt() * (c_out as f64 / c_in as f64).sqrt(), s2)
        }
        None => (1.0 / k as f64, c_in as f64 / ((k * k * c_out) as f64)),
    };
    let mut bank = ConvFilterBank::from_unfolded(&(frame.to_dense() * scale), c_in, k);
    bank.implied_sigma_w2 = Some(implied);
    Ok(bank)
}

/// Transposed construction for `c_out <= k^2 c_in`: Ũ has orthogonal rows,
/// `Ũ Ũ^T = sigma_w2 k^2 I`, so that `c_in * E[U^2] = sigma_w2`.
pub fn sample_orthogonal_conv_rows(c_out: usize, c_in: usize, k: usize, sigma_w2: f64, seed: &RngSeed) -> Result<ConvFilterBank> {
    check_odd(k)?;
    check_sigma(sigma_w2)?;
    if c_out == 0 || c_in == 0 {
        return Err(Error::invalid("channel counts must be positive"));
    }
    let spec = SamplerSpec::new(Family::OrthogonalConvRows, sigma_w2);
    let w = sample_conv_layer(&spec, c_out, c_in, k, &mut seed.rng())?;
    let mut bank = w.to_bank();
    bank.implied_sigma_w2 = Some(sigma_w2);
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::sample_orthogonal;

    #[test]
    fn tall_orthogonality() {
        let bank = sample_orthogonal_conv(36, 2, 3, &RngSeed::new(3), None).unwrap();
        let u = bank.unfolded();
        let g = u.transpose() * &u;
        let err = (g - DMatrix::<f64>::identity(18, 18) / 9.0).amax();
        assert!(err < 1e-10, "{err}");
        let implied = bank.implied_sigma_w2.unwrap();
        assert!((implied - 2.0 / 324.0).abs() < 1e-15);
    }

    #[test]
    fn precondition() {
        assert!(sample_orthogonal_conv(40, 4, 3, &RngSeed::new(0), None).is_ok());
        assert!(sample_orthogonal_conv(40, 5, 3, &RngSeed::new(0), None).is_err());
        assert!(sample_orthogonal_conv(40, 1, 2, &RngSeed::new(0), None).is_err());
    }

    #[test]
    fn k1_reduces_to_haar() {
        let seed = RngSeed::new(12);
        let bank = sample_orthogonal_conv(7, 7, 1, &seed, None).unwrap();
        let o = sample_orthogonal(7, 2.0, &seed).unwrap();
        let u = bank.unfolded() * 2f64.sqrt();
        assert!((u - o.entries).amax() < 1e-15);
    }

    #[test]
    fn rescale_sets_variance_parameter() {
        let bank = sample_orthogonal_conv(45, 5, 3, &RngSeed::new(1), Some(2.0)).unwrap();
        // columns have squared norm scale^2, so sum of squares = cols * scale^2
        let ss: f64 = bank.entries.iter().map(|v| v * v).sum();
        let mean_sq = ss / bank.entries.len() as f64;
        assert!((mean_sq * 5.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rows_construction() {
        let bank = sample_orthogonal_conv_rows(6, 4, 3, 1.5, &RngSeed::new(2)).unwrap();
        let u = bank.unfolded();
        let g = &u * u.transpose();
        let err = (g - DMatrix::<f64>::identity(6, 6) * (1.5 * 9.0)).amax();
        assert!(err < 1e-10);
    }

    #[test]
    fn layer_apply_matches_bank() {
        let mut rng = RngSeed::new(6).rng();
        for spec in [
            SamplerSpec::new(Family::OrthogonalConv, 1.0),
            SamplerSpec::new(Family::IidGaussian, 1.0),
        ] {
            for (c_out, c_in) in [(20, 2), (5, 3)] {
                let w = sample_conv_layer(&spec, c_out, c_in, 3, &mut rng).unwrap();
                let u = w.to_bank().unfolded();
                let x = DMatrix::from_fn(9 * c_in, 4, |i, j| ((i * 7 + j * 3) as f64).cos());
                let diff = (w.apply_patches(&x) - &u * &x).amax();
                assert!(diff < 1e-12);
                assert!((w.unfolded_row(1)[2] - u[(1, 2)]).abs() < 1e-12);
                assert!((w.unfolded_column(2)[1] - u[(1, 2)]).abs() < 1e-12);
            }
        }
    }
}
