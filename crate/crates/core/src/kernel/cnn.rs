use std::io::Write;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::fcn::check_variances;
use super::pair::{pair_expectation, QuadratureOptions};
use crate::image::Image;
use crate::weights::fmt_f64;
use crate::{par, Error, Result};

/// One slot of a `k x k` patch: an in-image pixel or zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchEntry {
    Pixel { row: usize, col: usize },
    Pad,
}

impl PatchEntry {
    pub fn pixel(&self) -> Option<(usize, usize)> {
        match *self {
            PatchEntry::Pixel { row, col } => Some((row, col)),
            PatchEntry::Pad => None,
        }
    }
}

pub(crate) fn check_kernel_size(k: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::invalid(format!("filter size must be odd, got {k}")));
    }
    Ok(())
}

/// The `k x k` neighbourhood of `mu`, row-major over offsets, with
/// out-of-image slots as [`PatchEntry::Pad`].
pub fn patch(mu: (usize, usize), k: usize, dims: (usize, usize)) -> Result<Vec<PatchEntry>> {
    check_kernel_size(k)?;
    let (h, w) = dims;
    if mu.0 >= h || mu.1 >= w {
        return Err(Error::invalid(format!("pixel {mu:?} outside {h}x{w} image")));
    }
    let half = (k / 2) as isize;
    let mut out = Vec::with_capacity(k * k);
    for dr in -half..=half {
        for dc in -half..=half {
            let r = mu.0 as isize + dr;
            let c = mu.1 as isize + dc;
            if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                out.push(PatchEntry::Pixel { row: r as usize, col: c as usize });
            } else {
                out.push(PatchEntry::Pad);
            }
        }
    }
    Ok(out)
}

/// Per-pixel kernels `K_nu(X, X')` of one layer plus the assembled same-pixel
/// covariance of that layer's preactivations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernelTable {
    pub layer: usize,
    pub k: usize,
    pub height: usize,
    pub width: usize,
    pub images: usize,
    pub sigma_b2: f64,
    pub sigma_w2: f64,
    /// `pixel_kernel[nu][p * images + q]`, `nu = row * width + col`.
    pub pixel_kernel: Vec<Vec<f64>>,
    /// Same-pixel preactivation covariance, laid out like `pixel_kernel`.
    pub assembled: Vec<Vec<f64>>,
}

impl ConvKernelTable {
    fn nu(&self, pixel: (usize, usize)) -> usize {
        pixel.0 * self.width + pixel.1
    }

    fn check_pixel(&self, pixel: (usize, usize)) -> Result<()> {
        if pixel.0 >= self.height || pixel.1 >= self.width {
            return Err(Error::invalid(format!(
                "pixel {pixel:?} outside {}x{} image",
                self.height, self.width
            )));
        }
        Ok(())
    }

    fn check_image(&self, x: usize) -> Result<()> {
        if x >= self.images {
            return Err(Error::invalid(format!("image index {x} out of range ({} images)", self.images)));
        }
        Ok(())
    }

    pub fn pixel_value(&self, pixel: (usize, usize), x: usize, xp: usize) -> Result<f64> {
        self.check_pixel(pixel)?;
        self.check_image(x)?;
        self.check_image(xp)?;
        Ok(self.pixel_kernel[self.nu(pixel)][x * self.images + xp])
    }

    /// Covariance of the preactivations at `(x, mu)` and `(xp, mu_p)`:
    /// `sigma_b2 + sigma_w2 * sum of K_nu(x, xp)` over pixels lying in both
    /// patches.
    pub fn covariance(&self, x: usize, mu: (usize, usize), xp: usize, mu_p: (usize, usize)) -> Result<f64> {
        self.check_image(x)?;
        self.check_image(xp)?;
        self.check_pixel(mu)?;
        self.check_pixel(mu_p)?;
        if mu == mu_p {
            return Ok(self.assembled[self.nu(mu)][x * self.images + xp]);
        }
        let half = self.k / 2;
        let r0 = mu.0.max(mu_p.0).saturating_sub(half);
        let r1 = (mu.0.min(mu_p.0) + half).min(self.height - 1);
        let c0 = mu.1.max(mu_p.1).saturating_sub(half);
        let c1 = (mu.1.min(mu_p.1) + half).min(self.width - 1);
        let mut sum = 0.0;
        if r0 <= r1 && c0 <= c1 && mu.0.abs_diff(mu_p.0) <= 2 * half && mu.1.abs_diff(mu_p.1) <= 2 * half {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    sum += self.pixel_kernel[r * self.width + c][x * self.images + xp];
                }
            }
        }
        Ok(self.sigma_b2 + self.sigma_w2 * sum)
    }

    /// CSV `nu_row,nu_col,x_idx,xprime_idx,value` of the per-pixel kernel.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["nu_row", "nu_col", "x_idx", "xprime_idx", "value"])?;
        for r in 0..self.height {
            for c in 0..self.width {
                let table = &self.pixel_kernel[r * self.width + c];
                for x in 0..self.images {
                    for xp in 0..self.images {
                        wr.write_record([
                            r.to_string(),
                            c.to_string(),
                            x.to_string(),
                            xp.to_string(),
                            fmt_f64(table[x * self.images + xp]),
                        ])?;
                    }
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Sum the per-pixel kernel over each pixel's own patch.
fn assemble(pixel_kernel: &[Vec<f64>], k: usize, h: usize, w: usize, sigma_b2: f64, sigma_w2: f64) -> Vec<Vec<f64>> {
    let half = k / 2;
    par::map_indexed(h * w, |nu| {
        let (r, c) = (nu / w, nu % w);
        let len = pixel_kernel[nu].len();
        let mut acc = vec![0.0; len];
        for rr in r.saturating_sub(half)..=(r + half).min(h - 1) {
            for cc in c.saturating_sub(half)..=(c + half).min(w - 1) {
                for (a, v) in acc.iter_mut().zip(&pixel_kernel[rr * w + cc]) {
                    *a += v;
                }
            }
        }
        acc.into_iter().map(|v| sigma_b2 + sigma_w2 * v).collect()
    })
}

/// Per-pixel kernels for layers `1..=depth + 1` of a CNN with `k x k`
/// filters, stride 1 and same-size zero padding.
pub fn kernel_cnn(
    images: &[Image],
    depth: usize,
    sigma_b2: f64,
    sigma_w2: f64,
    k: usize,
    act: &Activation,
    opts: QuadratureOptions,
) -> Result<Vec<ConvKernelTable>> {
    check_kernel_size(k)?;
    check_variances(sigma_b2, sigma_w2)?;
    let (c0, h, w) = Image::check_same_shape(images)?;
    let p = images.len();
    let first: Vec<Vec<f64>> = (0..h * w)
        .map(|nu| {
            let (r, c) = (nu / w, nu % w);
            let mut t = vec![0.0; p * p];
            for a in 0..p {
                for b in 0..=a {
                    let v: f64 = (0..c0).map(|ch| images[a].get(ch, r, c) * images[b].get(ch, r, c)).sum::<f64>()
                        / c0 as f64;
                    t[a * p + b] = v;
                    t[b * p + a] = v;
                }
            }
            t
        })
        .collect();
    let mut tables = Vec::with_capacity(depth + 1);
    let assembled = assemble(&first, k, h, w, sigma_b2, sigma_w2);
    tables.push(ConvKernelTable {
        layer: 1,
        k,
        height: h,
        width: w,
        images: p,
        sigma_b2,
        sigma_w2,
        pixel_kernel: first,
        assembled,
    });
    for layer in 2..=depth + 1 {
        let prev = &tables.last().unwrap().assembled;
        let next = par::try_map_indexed(h * w, |nu| {
            let s = &prev[nu];
            let mut t = vec![0.0; p * p];
            for a in 0..p {
                for b in 0..=a {
                    let v = pair_expectation(s[a * p + a], s[a * p + b], s[b * p + b], act, opts)?;
                    t[a * p + b] = v;
                    t[b * p + a] = v;
                }
            }
            Ok::<_, Error>(t)
        })?;
        let assembled = assemble(&next, k, h, w, sigma_b2, sigma_w2);
        tables.push(ConvKernelTable {
            layer,
            k,
            height: h,
            width: w,
            images: p,
            sigma_b2,
            sigma_w2,
            pixel_kernel: next,
            assembled,
        });
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::fcn::kernel_fcn;

    #[test]
    fn patch_geometry() {
        assert_eq!(patch((2, 3), 1, (5, 5)).unwrap(), vec![PatchEntry::Pixel { row: 2, col: 3 }]);
        let interior = patch((2, 2), 3, (5, 5)).unwrap();
        assert_eq!(interior.iter().filter(|e| e.pixel().is_some()).count(), 9);
        assert_eq!(interior[0], PatchEntry::Pixel { row: 1, col: 1 });
        let corner = patch((0, 0), 3, (5, 5)).unwrap();
        assert_eq!(corner.iter().filter(|e| e.pixel().is_some()).count(), 4);
        assert_eq!(corner.iter().filter(|e| **e == PatchEntry::Pad).count(), 5);
        assert!(patch((0, 0), 2, (5, 5)).is_err());
        assert!(patch((5, 0), 3, (5, 5)).is_err());
    }

    #[test]
    fn base_case_single_pixel() {
        let img = Image::new(1, 1, 1, vec![2.0]).unwrap();
        let t = kernel_cnn(&[img], 1, 0.0, 1.0, 3, &Activation::RELU, Default::default()).unwrap();
        assert_eq!(t[0].pixel_value((0, 0), 0, 0).unwrap(), 4.0);
    }

    #[test]
    fn one_by_one_filters_reduce_to_pixelwise_fcn() {
        let a = Image::from_fn(3, 4, 5, |c, r, col| ((c + 1) as f64 * 0.3 - r as f64 * 0.2 + col as f64 * 0.1).sin());
        let b = Image::from_fn(3, 4, 5, |c, r, col| ((c * r) as f64 * 0.1 + col as f64 * 0.4).cos());
        let (sb, sw) = (0.1, 1.8);
        let tables = kernel_cnn(&[a.clone(), b.clone()], 3, sb, sw, 1, &Activation::TANH, Default::default()).unwrap();
        for r in 0..4 {
            for col in 0..5 {
                let xs: Vec<Vec<f64>> =
                    [&a, &b].iter().map(|img| (0..3).map(|c| img.get(c, r, col)).collect()).collect();
                let fcn = kernel_fcn(&xs, 3, sb, sw, &Activation::TANH, Default::default()).unwrap();
                for (ct, ft) in tables.iter().zip(&fcn) {
                    for x in 0..2 {
                        for xp in 0..2 {
                            let got = ct.covariance(x, (r, col), xp, (r, col)).unwrap();
                            assert!((got - ft.get(x, xp)).abs() < 1e-12);
                        }
                    }
                    // distinct pixels share no patch entries
                    assert_eq!(ct.covariance(0, (r, col), 1, ((r + 1) % 4, col)).unwrap(), sb);
                }
            }
        }
    }

    #[test]
    fn cross_pixel_covariance_uses_patch_overlap() {
        let img = Image::from_fn(1, 5, 5, |_, r, c| (r * 5 + c) as f64);
        let t = &kernel_cnn(&[img], 0, 0.0, 1.0, 3, &Activation::RELU, Default::default()).unwrap()[0];
        // (2,2) and (2,3) overlap on columns 2..=3 of rows 1..=3
        let want: f64 = (1..=3).flat_map(|r| (2..=3).map(move |c| ((r * 5 + c) as f64).powi(2))).sum();
        assert!((t.covariance(0, (2, 2), 0, (2, 3)).unwrap() - want).abs() < 1e-9);
        assert_eq!(t.covariance(0, (0, 0), 0, (4, 4)).unwrap(), 0.0);
        let same: f64 = (1..=3).flat_map(|r| (1..=3).map(move |c| ((r * 5 + c) as f64).powi(2))).sum();
        assert!((t.covariance(0, (2, 2), 0, (2, 2)).unwrap() - same).abs() < 1e-9);
    }

    #[test]
    fn csv_and_shape_errors() {
        let a = Image::zeros(1, 2, 2);
        let b = Image::zeros(1, 2, 3);
        assert!(kernel_cnn(&[a.clone(), b], 1, 0.0, 1.0, 3, &Activation::RELU, Default::default()).is_err());
        let t = kernel_cnn(&[a.clone(), a], 1, 0.0, 1.0, 3, &Activation::RELU, Default::default()).unwrap();
        let mut buf = Vec::new();
        t[1].write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 4);
        assert!(text.starts_with("nu_row,nu_col,x_idx,xprime_idx,value\n0,0,0,0,"));
    }
}
