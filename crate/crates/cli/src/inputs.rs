//! Network inputs named in a config.

use serde::{Deserialize, Serialize};

use pseudoiid::image::Image;
use pseudoiid::propagate::{sample_sphere, Inputs};
use pseudoiid::RngSeed;

use crate::error::CliError;

/// Stream reserved for input sampling, far from the per-cell weight streams.
pub const INPUT_STREAM: u64 = 0xFFFF_FFFF;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// `count` iid uniform points on the unit sphere in `R^dim`.
    Sphere { dim: usize, count: usize },
    Vectors { data: Vec<Vec<f64>> },
    /// Deterministic smooth test images, see [`synthetic_image`].
    Synthetic { channels: usize, height: usize, width: usize, count: usize },
    Images { channels: usize, height: usize, width: usize, data: Vec<Vec<f64>> },
}

impl InputSpec {
    pub fn resolve(&self, seed: &RngSeed) -> Result<Inputs, CliError> {
        match self {
            InputSpec::Sphere { dim, count } => {
                if *dim == 0 || *count == 0 {
                    return Err(CliError::config("inputs: dim and count must be positive", Some("inputs".into())));
                }
                let mut rng = seed.child(INPUT_STREAM).rng();
                Ok(Inputs::Vectors((0..*count).map(|_| sample_sphere(*dim, &mut rng)).collect()))
            }
            InputSpec::Vectors { data } => Ok(Inputs::Vectors(data.clone())),
            InputSpec::Synthetic { channels, height, width, count } => Ok(Inputs::Images(
                (0..*count).map(|i| synthetic_image(*channels, *height, *width, i)).collect(),
            )),
            InputSpec::Images { channels, height, width, data } => data
                .iter()
                .map(|d| Image::new(*channels, *height, *width, d.clone()))
                .collect::<Result<Vec<_>, _>>()
                .map(Inputs::Images)
                .map_err(|e| CliError::config(format!("inputs: {e}"), Some("inputs.data".into()))),
        }
    }
}

/// Image `index` of a fixed family of smooth patterns with values in
/// roughly `[-1.5, 1.5]`.
pub fn synthetic_image(channels: usize, height: usize, width: usize, index: usize) -> Image {
    let i = index as f64;
    Image::from_fn(channels, height, width, |c, r, col| {
        let (c, r, col) = (c as f64, r as f64, col as f64);
        (0.9 * r + 0.6 * col + 1.3 * c + 2.0 * i).sin() + 0.5 * (0.35 * r * col / height as f64 + i).cos()
    })
}

/// Toy regression set: `train` and `test` points on the unit circle (test
/// points half-way between training angles when the counts agree), targets
/// `sin(3 theta)`.
pub fn toy_regression(train: usize, test: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let tau = std::f64::consts::TAU;
    let point = |t: f64| vec![t.cos(), t.sin()];
    let train_t: Vec<f64> = (0..train).map(|i| tau * i as f64 / train as f64).collect();
    let test_x = (0..test).map(|i| point(tau * (i as f64 + 0.5) / test as f64)).collect();
    (train_t.iter().map(|&t| point(t)).collect(), train_t.iter().map(|t| (3.0 * t).sin()).collect(), test_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_inputs_are_seeded() {
        let spec = InputSpec::Sphere { dim: 9, count: 2 };
        let a = spec.resolve(&RngSeed::new(1)).unwrap();
        assert_eq!(a, spec.resolve(&RngSeed::new(1)).unwrap());
        assert_ne!(a, spec.resolve(&RngSeed::new(2)).unwrap());
        let Inputs::Vectors(v) = a else { panic!() };
        assert!((v[1].iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthetic_images_differ() {
        let a = synthetic_image(1, 10, 10, 0);
        let b = synthetic_image(1, 10, 10, 1);
        assert_ne!(a, b);
        assert!(a.data.iter().all(|v| v.abs() <= 1.5));
    }

    #[test]
    fn toy_set() {
        let (x, y, t) = toy_regression(20, 20);
        assert_eq!((x.len(), y.len(), t.len()), (20, 20, 20));
        assert!((y[5] - (3.0 * std::f64::consts::TAU * 0.25).sin()).abs() < 1e-15);
    }
}
