use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};

use super::{check_dims, Family, SamplerSpec, WeightMatrix, WeightMeta};
use crate::rng::RngSeed;
use crate::{Error, Result};

/// Draw one entry of an iid family for a layer with fan-in `n`.
pub(crate) fn draw_iid_entry<R: Rng + ?Sized>(family: &Family, sigma_w2: f64, n: usize, rng: &mut R) -> f64 {
    let var = sigma_w2 / n as f64;
    match *family {
        Family::IidGaussian => {
            let z: f64 = StandardNormal.sample(rng);
            var.sqrt() * z
        }
        Family::IidUniform => {
            let a = (3.0 * var).sqrt();
            rng.random_range(-a..=a)
        }
        Family::IidDropout { p } => {
            let keep = rng.random::<f64>() >= p;
            let z: f64 = StandardNormal.sample(rng);
            if keep {
                (var / (1.0 - p)).sqrt() * z
            } else {
                0.0
            }
        }
        Family::IidCauchy => {
            let c = Cauchy::new(0.0, var.sqrt()).expect("positive scale");
            c.sample(rng)
        }
        _ => unreachable!("not an iid family"),
    }
}

pub(crate) fn iid_matrix<R: Rng + ?Sized>(m: usize, n: usize, spec: &SamplerSpec, rng: &mut R) -> DMatrix<f64> {
    let data: Vec<f64> = (0..m * n).map(|_| draw_iid_entry(&spec.family, spec.sigma_w2, n, rng)).collect();
    DMatrix::from_row_slice(m, n, &data)
}

/// Sample an `m x n` matrix with independent entries of variance
/// `sigma_w2 / n` (Cauchy: scale `sigma_w / sqrt(n)`).
pub fn sample_iid(m: usize, n: usize, spec: &SamplerSpec, seed: &RngSeed) -> Result<WeightMatrix> {
    check_dims(m, n)?;
    spec.validate()?;
    if !spec.family.is_iid() {
        return Err(Error::invalid(format!("{} is not an iid family", spec.family.name())));
    }
    let mut rng = seed.rng();
    Ok(WeightMatrix {
        entries: iid_matrix(m, n, spec, &mut rng),
        meta: Some(WeightMeta { spec: spec.clone(), seed: seed.clone() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        let seed = RngSeed::new(0);
        assert!(sample_iid(2, 2, &SamplerSpec::iid_gaussian(0.0), &seed).is_err());
        assert!(sample_iid(0, 2, &SamplerSpec::iid_gaussian(1.0), &seed).is_err());
        let dropout = SamplerSpec::new(Family::IidDropout { p: 1.0 }, 1.0);
        assert!(sample_iid(2, 2, &dropout, &seed).is_err());
        let haar = SamplerSpec::new(Family::HaarOrthogonal, 1.0);
        assert!(sample_iid(2, 2, &haar, &seed).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SamplerSpec::new(Family::IidDropout { p: 0.5 }, 2.0);
        let a = sample_iid(5, 7, &spec, &RngSeed::new(3).child(1)).unwrap();
        let b = sample_iid(5, 7, &spec, &RngSeed::new(3).child(1)).unwrap();
        assert_eq!(a, b);
        let c = sample_iid(5, 7, &spec, &RngSeed::new(3).child(2)).unwrap();
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn gaussian_mean_square_300() {
        // LLN oracle: mean of 90000 squares of N(0, 2/300) has relative
        // standard error sqrt(2/90000) ~ 0.5%.
        let w = sample_iid(300, 300, &SamplerSpec::iid_gaussian(2.0), &RngSeed::new(11)).unwrap();
        let rel = (w.mean_square() / (2.0 / 300.0) - 1.0).abs();
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn uniform_support_and_dropout_sparsity() {
        let n = 200;
        let u = sample_iid(50, n, &SamplerSpec::new(Family::IidUniform, 2.0), &RngSeed::new(4)).unwrap();
        let a = (3.0 * 2.0 / n as f64).sqrt();
        assert!(u.entries.iter().all(|v| v.abs() <= a));
        let d = sample_iid(100, n, &SamplerSpec::new(Family::IidDropout { p: 0.5 }, 2.0), &RngSeed::new(4)).unwrap();
        let frac = d.nnz() as f64 / (100 * n) as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        let rel = (d.mean_square() / (2.0 / n as f64) - 1.0).abs();
        assert!(rel < 0.05, "{rel}");
    }
}
