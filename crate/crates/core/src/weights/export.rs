//! Sparse-pattern CSV: `row,col,value` triplets of the nonzero entries.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::WeightMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Fixed 17-significant-digit rendering; parses back to the same bits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_triplets<W: Write>(w: &WeightMatrix, out: W) -> Result<usize> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["row", "col", "value"])?;
    let mut count = 0;
    for i in 0..w.m() {
        for j in 0..w.n() {
            let v = w.entries[(i, j)];
            if v != 0.0 {
                wr.write_record([i.to_string(), j.to_string(), fmt_f64(v)])?;
                count += 1;
            }
        }
    }
    wr.flush()?;
    Ok(count)
}

pub fn read_triplets<R: Read>(input: R) -> Result<Vec<Triplet>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Write the nonzero pattern of `w` to `path`; returns the triplet count.
pub fn export_mask(w: &WeightMatrix, path: &Path) -> Result<usize> {
    let file = std::fs::File::create(path)?;
    write_triplets(w, std::io::BufWriter::new(file))
}

/// Rebuild an `m x n` matrix from a triplet file.
pub fn import_mask(path: &Path, m: usize, n: usize) -> Result<WeightMatrix> {
    let triplets = read_triplets(std::fs::File::open(path)?)?;
    let mut entries = DMatrix::zeros(m, n);
    for t in triplets {
        if t.row >= m || t.col >= n {
            return Err(Error::mismatch(format!("triplet ({}, {}) outside {m}x{n}", t.row, t.col)));
        }
        entries[(t.row, t.col)] = t.value;
    }
    Ok(WeightMatrix::from_matrix(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::weights::{sample_block_sparse, BaseDist};

    #[test]
    fn zero_matrix_has_no_triplets() {
        let mut buf = Vec::new();
        let n = write_triplets(&WeightMatrix::from_matrix(DMatrix::zeros(3, 4)), &mut buf).unwrap();
        assert_eq!(n, 0);
        assert_eq!(String::from_utf8(buf).unwrap(), "row,col,value\n");
    }

    #[test]
    fn block_sparse_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.csv");
        let w = sample_block_sparse(30, 30, 6, 2.0, BaseDist::Gaussian, &RngSeed::new(8)).unwrap();
        assert_eq!(export_mask(&w, &path).unwrap(), 180);
        let back = import_mask(&path, 30, 30).unwrap();
        assert_eq!(back.entries, w.entries);
    }
}
