use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::image::Image;
use crate::kernel::{kernel_cnn, kernel_fcn, Activation, QuadratureOptions};
use crate::weights::fmt_f64;
use crate::{Error, Result};

const JITTERS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Network whose output-layer kernel is the GP prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NngpArch {
    Fcn,
    /// Inputs are flattened `channels x height x width` images; the output is
    /// read at `pixel`.
    Cnn { k: usize, channels: usize, height: usize, width: usize, pixel: (usize, usize) },
}

#[derive(Debug, Clone)]
pub struct NngpProblem<'a> {
    pub train_x: &'a [Vec<f64>],
    pub train_y: &'a [f64],
    pub test_x: &'a [Vec<f64>],
    pub depth: usize,
    pub sigma_b2: f64,
    pub sigma_w2: f64,
    pub activation: &'a Activation,
    pub noise: f64,
    pub arch: NngpArch,
    pub quadrature: QuadratureOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResult {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub prior_variance: Vec<f64>,
    pub log_marginal_likelihood: f64,
    /// Diagonal jitter added on top of the noise, relative to the mean
    /// prior variance of the training points.
    pub jitter: f64,
}

impl PosteriorResult {
    /// CSV `index,mean,variance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["index", "mean", "variance"])?;
        for (i, (m, v)) in self.mean.iter().zip(&self.variance).enumerate() {
            wr.write_record([i.to_string(), fmt_f64(*m), fmt_f64(*v)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn prior_kernel(p: &NngpProblem<'_>, all: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    match p.arch {
        NngpArch::Fcn => {
            let tables = kernel_fcn(all, p.depth, p.sigma_b2, p.sigma_w2, p.activation, p.quadrature)?;
            Ok(tables.last().unwrap().matrix.clone())
        }
        NngpArch::Cnn { k, channels, height, width, pixel } => {
            let images = all
                .iter()
                .map(|x| Image::new(channels, height, width, x.clone()))
                .collect::<Result<Vec<_>>>()?;
            let tables = kernel_cnn(&images, p.depth, p.sigma_b2, p.sigma_w2, k, p.activation, p.quadrature)?;
            let t = tables.last().unwrap();
            let n = all.len();
            let mut m = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in 0..n {
                    m[(a, b)] = t.covariance(a, pixel, b, pixel)?;
                }
            }
            Ok(m)
        }
    }
}

/// Exact GP posterior under the NNGP prior of the given network.
pub fn nngp_regress(p: &NngpProblem<'_>) -> Result<PosteriorResult> {
    let n = p.train_x.len();
    if n == 0 {
        return Err(Error::invalid("no training points"));
    }
    if p.train_y.len() != n {
        return Err(Error::mismatch(format!("{} targets for {n} training inputs", p.train_y.len())));
    }
    if !(p.noise.is_finite() && p.noise >= 0.0) {
        return Err(Error::invalid(format!("noise variance must be non-negative, got {}", p.noise)));
    }
    let all: Vec<Vec<f64>> = p.train_x.iter().chain(p.test_x).cloned().collect();
    let k = prior_kernel(p, &all)?;
    let m = p.test_x.len();
    let k_train = k.view((0, 0), (n, n)).into_owned();
    let k_cross = k.view((0, n), (n, m)).into_owned();
    let scale = k_train.diagonal().mean().abs().max(f64::MIN_POSITIVE);

    let mut chol = None;
    let mut used = 0.0;
    for &j in &JITTERS {
        let mut a = k_train.clone();
        for i in 0..n {
            a[(i, i)] += p.noise + j * scale;
        }
        if let Some(c) = Cholesky::new(a) {
            chol = Some(c);
            used = j;
            break;
        }
    }
    let chol = chol.ok_or(Error::Factorization { jitter: JITTERS[JITTERS.len() - 1] })?;
    let y = DVector::from_column_slice(p.train_y);
    let alpha = chol.solve(&y);
    let mean = k_cross.transpose() * &alpha;
    let v = chol.l().solve_lower_triangular(&k_cross).ok_or(Error::Factorization { jitter: used })?;
    let prior_variance: Vec<f64> = (0..m).map(|t| k[(n + t, n + t)]).collect();
    let variance = (0..m)
        .map(|t| (prior_variance[t] - v.column(t).norm_squared()).max(0.0))
        .collect();
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let log_marginal_likelihood =
        -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(PosteriorResult {
        mean: mean.iter().copied().collect(),
        variance,
        prior_variance,
        log_marginal_likelihood,
        jitter: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![-2.0 + 4.0 * i as f64 / 19.0, 1.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (1.5 * x[0]).sin()).collect();
        let test: Vec<Vec<f64>> = (0..7).map(|i| vec![-1.7 + 0.5 * i as f64, 1.0]).collect();
        (xs, ys, test)
    }

    fn problem<'a>(
        xs: &'a [Vec<f64>],
        ys: &'a [f64],
        test: &'a [Vec<f64>],
        act: &'a Activation,
        noise: f64,
    ) -> NngpProblem<'a> {
        NngpProblem {
            train_x: xs,
            train_y: ys,
            test_x: test,
            depth: 3,
            sigma_b2: 0.1,
            sigma_w2: 2.0,
            activation: act,
            noise,
            arch: NngpArch::Fcn,
            quadrature: Default::default(),
        }
    }

    #[test]
    fn interpolates_training_points() {
        let (xs, ys, _) = toy();
        let act = Activation::RELU;
        let r = nngp_regress(&problem(&xs[..6], &ys[..6], &xs[..6], &act, 0.0)).unwrap();
        for (m, y) in r.mean.iter().zip(&ys[..6]) {
            assert!((m - y).abs() < 1e-6);
        }
        assert!(r.variance.iter().all(|&v| (0.0..1e-6).contains(&v)));
    }

    #[test]
    fn zero_targets_give_zero_mean_and_shrunk_variance() {
        let (xs, _, test) = toy();
        let act = Activation::TANH;
        let zeros = vec![0.0; xs.len()];
        let r = nngp_regress(&problem(&xs, &zeros, &test, &act, 0.01)).unwrap();
        assert!(r.mean.iter().all(|&m| m == 0.0));
        for (v, pv) in r.variance.iter().zip(&r.prior_variance) {
            assert!(*v >= 0.0 && *v <= *pv);
        }
    }

    #[test]
    fn matches_dense_solve_oracle() {
        let (xs, ys, test) = toy();
        let act = Activation::RELU;
        let noise = 1e-2;
        let p = problem(&xs, &ys, &test, &act, noise);
        let r = nngp_regress(&p).unwrap();
        let all: Vec<Vec<f64>> = xs.iter().chain(&test).cloned().collect();
        let k = kernel_fcn(&all, 3, 0.1, 2.0, &act, Default::default()).unwrap().pop().unwrap().matrix;
        let n = xs.len();
        let mut a = k.view((0, 0), (n, n)).into_owned();
        for i in 0..n {
            a[(i, i)] += noise + r.jitter * a.diagonal().mean();
        }
        let sol = a.lu().solve(&DVector::from_column_slice(&ys)).unwrap();
        for t in 0..test.len() {
            let want: f64 = (0..n).map(|i| k[(i, n + t)] * sol[i]).sum();
            assert!((r.mean[t] - want).abs() < 1e-8, "{} vs {want}", r.mean[t]);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), test.len() + 1);
    }

    #[test]
    fn cnn_prior() {
        let imgs: Vec<Vec<f64>> = (0..4).map(|s| (0..16).map(|i| ((i * (s + 1)) as f64 * 0.37).sin()).collect()).collect();
        let ys = [0.5, -0.2, 0.1];
        let act = Activation::ERF;
        let p = NngpProblem {
            train_x: &imgs[..3],
            train_y: &ys,
            test_x: &imgs[3..],
            depth: 2,
            sigma_b2: 0.0,
            sigma_w2: 1.5,
            activation: &act,
            noise: 0.05,
            arch: NngpArch::Cnn { k: 3, channels: 1, height: 4, width: 4, pixel: (1, 2) },
            quadrature: Default::default(),
        };
        let r = nngp_regress(&p).unwrap();
        assert!(r.variance[0] <= r.prior_variance[0]);
        let bad = NngpProblem { arch: NngpArch::Cnn { k: 3, channels: 2, height: 4, width: 4, pixel: (0, 0) }, ..p };
        assert!(nngp_regress(&bad).is_err());
    }

    #[test]
    fn input_errors() {
        let (xs, ys, test) = toy();
        let act = Activation::RELU;
        assert!(nngp_regress(&problem(&xs, &ys[..3], &test, &act, 0.0)).is_err());
        assert!(nngp_regress(&problem(&xs, &ys, &test, &act, -1.0)).is_err());
    }
}
