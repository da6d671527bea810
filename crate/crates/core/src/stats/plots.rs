use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_len, check_target};
use crate::weights::fmt_f64;
use crate::{Error, Result};

/// `(theoretical, empirical)` quantile pairs at plotting positions
/// `(i - 0.5) / T`.
pub fn qq_points(samples: &[f64], target_variance: f64) -> Result<Vec<(f64, f64)>> {
    check_len(samples, 1, "qq_points")?;
    check_target(target_variance)?;
    let normal = Normal::new(0.0, target_variance.sqrt()).expect("positive sd");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let t = xs.len() as f64;
    Ok(xs
        .into_iter()
        .enumerate()
        .map(|(i, x)| (normal.inverse_cdf((i as f64 + 0.5) / t), x))
        .collect())
}

pub fn write_qq_csv<W: Write>(points: &[(f64, f64)], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["theoretical", "empirical"])?;
    for (t, e) in points {
        wr.write_record([fmt_f64(*t), fmt_f64(*e)])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width histogram over `range`, or the sample range when `None`.
/// Values outside the range are dropped; the last bin is closed.
pub fn histogram(samples: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Vec<Bin>> {
    check_len(samples, 1, "histogram")?;
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let (lo, hi) = range.unwrap_or_else(|| {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    });
    if !(hi > lo) {
        return Err(Error::invalid(format!("empty histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|i| Bin { left: lo + i as f64 * width, right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width }, count: 0 })
        .collect();
    for &x in samples {
        if x < lo || x > hi {
            continue;
        }
        let i = (((x - lo) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    Ok(out)
}

pub fn write_histogram_csv<W: Write>(bins: &[Bin], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["bin_left", "bin_right", "count"])?;
    for b in bins {
        wr.write_record([fmt_f64(b.left), fmt_f64(b.right), b.count.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn qq_for_normal_samples() {
        let mut rng = RngSeed::new(1).rng();
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let pts = qq_points(&xs, 1.0).unwrap();
        let central = &pts[50..pts.len() - 50];
        assert!(central.iter().all(|(t, e)| (t - e).abs() < 0.1));
        assert!(pts.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn qq_small_and_constant() {
        let pts = qq_points(&[1.0, -1.0], 1.0).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].0 + pts[1].0).abs() < 1e-12);
        let flat = qq_points(&[2.0; 5], 1.0).unwrap();
        assert!(flat.iter().all(|p| p.1 == 2.0));
        let mut buf = Vec::new();
        write_qq_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("theoretical,empirical\n"));
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[0.0, 0.1, 0.5, 1.0, 2.0], 2, Some((0.0, 1.0))).unwrap();
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![2, 2]);
        assert_eq!(h[1].right, 1.0);
        let auto = histogram(&[3.0; 4], 3, None).unwrap();
        assert_eq!(auto.iter().map(|b| b.count).sum::<usize>(), 4);
        assert!(histogram(&[1.0], 0, None).is_err());
        let mut buf = Vec::new();
        write_histogram_csv(&h, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("bin_left,bin_right,count\n"));
    }
}
