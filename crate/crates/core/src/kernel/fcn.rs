use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::pair::{pair_expectation, QuadratureOptions};
use crate::weights::fmt_f64;
use crate::{par, Error, Result};

/// Negative eigenvalues down to `-PSD_FLOOR * trace` are clipped to zero.
pub const PSD_FLOOR: f64 = 1e-8;

/// Limiting covariance of the layer-`layer` preactivations over a list of
/// inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub layer: usize,
    pub matrix: DMatrix<f64>,
    pub sigma_b2: f64,
    pub sigma_w2: f64,
}

impl KernelTable {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.matrix[(p, q)]
    }

    /// CSV matrix with a header row and a leading label column.
    pub fn write_csv<W: Write>(&self, labels: Option<&[String]>, out: W) -> Result<()> {
        let n = self.size();
        let labels: Vec<String> = match labels {
            Some(l) if l.len() == n => l.to_vec(),
            Some(l) => return Err(Error::mismatch(format!("{} labels for {n} inputs", l.len()))),
            None => (0..n).map(|i| format!("x{i}")).collect(),
        };
        let mut wr = csv::Writer::from_writer(out);
        let mut header = vec!["label".to_string()];
        header.extend(labels.iter().cloned());
        wr.write_record(&header)?;
        for (p, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..n).map(|q| fmt_f64(self.matrix[(p, q)])));
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Symmetrise, then clip small negative eigenvalues; larger violations are
/// an error.
pub fn project_psd(m: &mut DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    if n == 0 {
        return Ok(());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel matrix has non-finite entries"));
    }
    let trace = m.trace().abs();
    let floor = -PSD_FLOOR * trace;
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(());
    }
    if min < floor {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min, floor });
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(())
}

/// One step `K -> sigma_b2 + sigma_w2 * E[phi(u) phi(v)]` on a full matrix.
pub fn kernel_step(
    prev: &DMatrix<f64>,
    sigma_b2: f64,
    sigma_w2: f64,
    act: &Activation,
    opts: QuadratureOptions,
) -> Result<DMatrix<f64>> {
    let n = prev.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|p| (0..=p).map(move |q| (p, q))).collect();
    let values = par::try_map_indexed(pairs.len(), |k| {
        let (p, q) = pairs[k];
        pair_expectation(prev[(p, p)], prev[(p, q)], prev[(q, q)], act, opts)
    })?;
    let mut out = DMatrix::zeros(n, n);
    for (&(p, q), v) in pairs.iter().zip(values) {
        let v = sigma_b2 + sigma_w2 * v;
        out[(p, q)] = v;
        out[(q, p)] = v;
    }
    Ok(out)
}

pub(crate) fn check_variances(sigma_b2: f64, sigma_w2: f64) -> Result<()> {
    if !(sigma_w2.is_finite() && sigma_w2 > 0.0) {
        return Err(Error::invalid(format!("sigma_w2 must be positive, got {sigma_w2}")));
    }
    if !(sigma_b2.is_finite() && sigma_b2 >= 0.0) {
        return Err(Error::invalid(format!("sigma_b2 must be non-negative, got {sigma_b2}")));
    }
    Ok(())
}

/// Kernels for layers `1..=depth + 1` of a fully connected network with
/// `depth` hidden layers.
pub fn kernel_fcn(
    inputs: &[Vec<f64>],
    depth: usize,
    sigma_b2: f64,
    sigma_w2: f64,
    act: &Activation,
    opts: QuadratureOptions,
) -> Result<Vec<KernelTable>> {
    check_variances(sigma_b2, sigma_w2)?;
    let n0 = inputs.first().ok_or_else(|| Error::invalid("no inputs given"))?.len();
    if n0 == 0 {
        return Err(Error::invalid("inputs must have dimension >= 1"));
    }
    if let Some((i, x)) = inputs.iter().enumerate().find(|(_, x)| x.len() != n0) {
        return Err(Error::mismatch(format!("input {i} has dimension {}, expected {n0}", x.len())));
    }
    let p = inputs.len();
    let mut k = DMatrix::from_fn(p, p, |a, b| {
        let dot: f64 = inputs[a].iter().zip(&inputs[b]).map(|(u, v)| u * v).sum();
        sigma_b2 + sigma_w2 * dot / n0 as f64
    });
    project_psd(&mut k)?;
    let mut tables = Vec::with_capacity(depth + 1);
    tables.push(KernelTable { layer: 1, matrix: k, sigma_b2, sigma_w2 });
    for layer in 2..=depth + 1 {
        let mut next = kernel_step(&tables.last().unwrap().matrix, sigma_b2, sigma_w2, act, opts)?;
        project_psd(&mut next)?;
        tables.push(KernelTable { layer, matrix: next, sigma_b2, sigma_w2 });
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn first_layer_inner_product() {
        let x = unit(vec![1.0; 9]);
        let t = kernel_fcn(&[x], 1, 0.0, 1.0, &Activation::TANH, Default::default()).unwrap();
        assert!((t[0].get(0, 0) - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(t.len(), 2);
        assert_eq!(t[1].layer, 2);
    }

    #[test]
    fn identity_network_telescopes() {
        let xs = vec![vec![1.0, 2.0, -1.0], vec![0.5, 0.0, 3.0]];
        let sw = 1.7;
        let t = kernel_fcn(&xs, 4, 0.0, sw, &Activation::IDENTITY, Default::default()).unwrap();
        for (l, table) in t.iter().enumerate() {
            for p in 0..2 {
                for q in 0..2 {
                    let dot: f64 = xs[p].iter().zip(&xs[q]).map(|(a, b)| a * b).sum();
                    let want = sw.powi(l as i32 + 1) * dot / 3.0;
                    assert!((table.get(p, q) - want).abs() < 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let act = Activation::RELU;
        assert!(kernel_fcn(&[vec![1.0], vec![1.0, 2.0]], 1, 0.0, 1.0, &act, Default::default()).is_err());
        assert!(kernel_fcn(&[], 1, 0.0, 1.0, &act, Default::default()).is_err());
        assert!(kernel_fcn(&[vec![1.0]], 1, 0.0, 0.0, &act, Default::default()).is_err());
    }

    #[test]
    fn psd_projection() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 + 1e-10, 1.0 + 1e-10, 1.0]);
        project_psd(&mut m).unwrap();
        assert!(SymmetricEigen::new(m.clone()).eigenvalues.min() >= -1e-15);
        let mut bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(project_psd(&mut bad), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn csv_export() {
        let t = kernel_fcn(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1, 0.1, 1.0, &Activation::RELU, Default::default()).unwrap();
        let mut buf = Vec::new();
        t[1].write_csv(Some(&["a".into(), "b".into()]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("label,a,b\na,"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tables_are_psd_and_cauchy_schwarz(
            xs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 2..5),
            sb in 0.0f64..0.5,
            sw in 0.2f64..4.0,
            which in 0usize..4,
        ) {
            let act = [Activation::RELU, Activation::TANH, Activation::ERF, Activation::HTANH][which].clone();
            let tables = kernel_fcn(&xs, 3, sb, sw, &act, Default::default()).unwrap();
            for t in &tables {
                let m = &t.matrix;
                let floor = -PSD_FLOOR * m.trace().abs() - 1e-14;
                prop_assert!(SymmetricEigen::new(m.clone()).eigenvalues.min() >= floor);
                for p in 0..m.nrows() {
                    for q in 0..m.nrows() {
                        prop_assert_eq!(m[(p, q)], m[(q, p)]);
                        prop_assert!(m[(p, q)].abs() <= (m[(p, p)] * m[(q, q)]).sqrt() + 1e-10);
                    }
                }
            }
        }
    }
}
