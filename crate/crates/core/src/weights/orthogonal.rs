use super::{check_sigma, Family, HouseholderFrame, SamplerSpec, WeightMatrix, WeightMeta};
use crate::rng::RngSeed;
use crate::{Error, Result};

/// Draw `W = sigma_w * O` with `O` Haar orthogonal, so `W^T W = sigma_w2 I`.
pub fn sample_orthogonal(n: usize, sigma_w2: f64, seed: &RngSeed) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::invalid("orthogonal dimension must be positive"));
    }
    check_sigma(sigma_w2)?;
    let frame = HouseholderFrame::sample(n, n, &mut seed.rng());
    Ok(WeightMatrix {
        entries: frame.to_dense() * sigma_w2.sqrt(),
        meta: Some(WeightMeta {
            spec: SamplerSpec::new(Family::HaarOrthogonal, sigma_w2),
            seed: seed.clone(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn orthogonality_n64() {
        let w = sample_orthogonal(64, 3.0, &RngSeed::new(4)).unwrap();
        let g = w.entries.transpose() * &w.entries;
        let err = (g - DMatrix::<f64>::identity(64, 64) * 3.0).amax();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn n1_is_plus_minus_sigma() {
        let mut seen = [false, false];
        for s in 0..50 {
            let w = sample_orthogonal(1, 4.0, &RngSeed::new(s)).unwrap();
            let v = w.entries[(0, 0)];
            assert!(v == 2.0 || v == -2.0);
            seen[(v > 0.0) as usize] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn rejects_empty() {
        assert!(sample_orthogonal(0, 1.0, &RngSeed::new(0)).is_err());
    }
}
