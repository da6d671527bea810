//! Haar-distributed orthonormal frames stored as products of Householder
//! reflectors.
//!
//! Householder QR of an iid Gaussian matrix with the signs of `diag(R)`
//! folded into `Q` yields a Haar orthogonal matrix. Because the trailing
//! block after each reflection is again iid Gaussian and independent of the
//! reflectors already built, reflector `k` can be generated from a fresh
//! Gaussian vector of length `d - k` instead of transforming the whole matrix.
//! Sampling the first `r` columns then costs `O(dr)` draws, and applying the
//! frame to a vector costs `O(dr)` flops.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// The first `cols` columns of a Haar orthogonal `dim x dim` matrix,
/// `F = H_0 H_1 ... H_{t-1} [diag(signs); 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderFrame {
    dim: usize,
    cols: usize,
    /// Reflector `k` acts on coordinates `k..dim`; unit norm.
    reflectors: Vec<Vec<f64>>,
    signs: Vec<f64>,
}

fn reflect(v: &[f64], x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let s = 2.0 * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

impl HouseholderFrame {
    /// Draw a uniformly random orthonormal `dim x cols` frame.
    ///
    /// Panics if `cols > dim` or `dim == 0`; callers validate dimensions.
    pub fn sample<R: Rng + ?Sized>(dim: usize, cols: usize, rng: &mut R) -> Self {
        assert!(dim > 0 && cols <= dim, "frame {dim}x{cols} is not tall");
        let n_refl = cols.min(dim - 1);
        let mut reflectors = Vec::with_capacity(n_refl);
        let mut signs = Vec::with_capacity(cols);
        for k in 0..n_refl {
            let len = dim - k;
            let mut g: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s0 = if g[0] >= 0.0 { 1.0 } else { -1.0 };
            // H g = -s0 |g| e_1, so the R diagonal entry has sign -s0.
            g[0] += s0 * norm;
            let vnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if vnorm > 0.0 {
                g.iter_mut().for_each(|v| *v /= vnorm);
            }
            reflectors.push(g);
            signs.push(-s0);
        }
        if cols == dim {
            let z: f64 = StandardNormal.sample(rng);
            signs.push(if z >= 0.0 { 1.0 } else { -1.0 });
        }
        HouseholderFrame { dim, cols, reflectors, signs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `F y` for `y` of length `cols`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.cols);
        let mut x = vec![0.0; self.dim];
        for (i, (yi, s)) in y.iter().zip(&self.signs).enumerate() {
            x[i] = yi * s;
        }
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            reflect(v, &mut x[k..]);
        }
        x
    }

    /// `F^T x` for `x` of length `dim`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut x = x.to_vec();
        for (k, v) in self.reflectors.iter().enumerate() {
            reflect(v, &mut x[k..]);
        }
        x.truncate(self.cols);
        x.iter_mut().zip(&self.signs).for_each(|(xi, s)| *xi *= s);
        x
    }

    /// Column `j` of the frame.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.cols];
        e[j] = 1.0;
        self.apply(&e)
    }

    /// Row `i` of the frame.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        e[i] = 1.0;
        self.apply_transpose(&e)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.cols);
        for j in 0..self.cols {
            out.set_column(j, &nalgebra::DVector::from_vec(self.column(j)));
        }
        out
    }
}
