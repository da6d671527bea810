use nalgebra::DMatrix;

use super::config::{Architecture, NetworkConfig};
use crate::image::Image;
use crate::rng::RngSeed;
use crate::weights::{sample_bias, sample_conv_layer, ConvFilterBank, ConvWeights};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConvNetworkWeights {
    pub layers: Vec<ConvWeights>,
    pub biases: Vec<Vec<f64>>,
}

impl ConvNetworkWeights {
    pub fn from_banks(banks: Vec<ConvFilterBank>, biases: Vec<Vec<f64>>) -> Self {
        let layers = banks
            .into_iter()
            .map(|b| ConvWeights::Dense { unfolded: b.unfolded(), c_in: b.c_in, k: b.k })
            .collect();
        ConvNetworkWeights { layers, biases }
    }
}

pub(crate) struct CnnShape<'a> {
    pub channels: &'a [usize],
    pub k: usize,
    pub height: usize,
    pub width: usize,
}

pub(crate) fn cnn_shape(cfg: &NetworkConfig) -> Result<CnnShape<'_>> {
    match &cfg.architecture {
        Architecture::Cnn { channels, k, height, width } => {
            Ok(CnnShape { channels, k: *k, height: *height, width: *width })
        }
        Architecture::Fcn { .. } => Err(Error::invalid("expected a convolutional network")),
    }
}

/// Draw filters and biases for layers `1..=up_to`, layer `l` from stream
/// `seed.child(l)`.
pub fn sample_cnn_weights(cfg: &NetworkConfig, seed: &RngSeed, up_to: usize) -> Result<ConvNetworkWeights> {
    let shape = cnn_shape(cfg)?;
    if up_to == 0 || up_to >= shape.channels.len() {
        return Err(Error::invalid(format!("layer {up_to} outside 1..={}", shape.channels.len() - 1)));
    }
    let mut layers = Vec::with_capacity(up_to);
    let mut biases = Vec::with_capacity(up_to);
    for l in 1..=up_to {
        let mut rng = seed.child(l as u64).rng();
        let (c_out, c_in) = (shape.channels[l], shape.channels[l - 1]);
        layers.push(sample_conv_layer(&cfg.layers[l - 1], c_out, c_in, shape.k, &mut rng)?);
        biases.push(sample_bias(c_out, cfg.sigma_b2, &mut rng));
    }
    Ok(ConvNetworkWeights { layers, biases })
}

/// Half-open pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Region {
    pub r0: usize,
    pub r1: usize,
    pub c0: usize,
    pub c1: usize,
}

impl Region {
    pub fn full(h: usize, w: usize) -> Self {
        Region { r0: 0, r1: h, c0: 0, c1: w }
    }

    pub fn point(r: usize, c: usize) -> Self {
        Region { r0: r, r1: r + 1, c0: c, c1: c + 1 }
    }

    pub fn rows(&self) -> usize {
        self.r1 - self.r0
    }

    pub fn cols(&self) -> usize {
        self.c1 - self.c0
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn union(&self, o: &Region) -> Region {
        Region { r0: self.r0.min(o.r0), r1: self.r1.max(o.r1), c0: self.c0.min(o.c0), c1: self.c1.max(o.c1) }
    }

    /// Grow by `by` pixels on every side, clipped to an `h x w` image.
    pub fn dilate(&self, by: usize, h: usize, w: usize) -> Region {
        Region {
            r0: self.r0.saturating_sub(by),
            r1: (self.r1 + by).min(h),
            c0: self.c0.saturating_sub(by),
            c1: (self.c1 + by).min(w),
        }
    }
}

/// Feature maps restricted to a region, channel-major.
#[derive(Debug, Clone)]
pub(crate) struct Map {
    pub channels: usize,
    pub region: Region,
    pub data: Vec<f64>,
}

impl Map {
    pub fn get(&self, ch: usize, r: usize, c: usize) -> f64 {
        let reg = &self.region;
        self.data[(ch * reg.rows() + (r - reg.r0)) * reg.cols() + (c - reg.c0)]
    }

    fn from_image(x: &Image) -> Map {
        Map { channels: x.channels, region: Region::full(x.height, x.width), data: x.data.clone() }
    }

    fn into_image(self, h: usize, w: usize) -> Image {
        debug_assert_eq!(self.region, Region::full(h, w));
        Image { channels: self.channels, height: h, width: w, data: self.data }
    }
}

/// One "same"-padded, stride-1 convolution evaluated on `out`.
fn conv_layer(weights: &ConvWeights, bias: &[f64], input: &Map, out: Region, h: usize, w: usize) -> Map {
    let k = weights.k();
    let half = (k / 2) as isize;
    let kk = k * k;
    let c_in = weights.c_in();
    let mut patches = DMatrix::zeros(c_in * kk, out.len());
    for r in out.r0..out.r1 {
        for c in out.c0..out.c1 {
            let col = (r - out.r0) * out.cols() + (c - out.c0);
            for dr in -half..=half {
                let rr = r as isize + dr;
                if rr < 0 || rr >= h as isize {
                    continue;
                }
                for dc in -half..=half {
                    let cc = c as isize + dc;
                    if cc < 0 || cc >= w as isize {
                        continue;
                    }
                    let mu = ((dr + half) as usize) * k + (dc + half) as usize;
                    for j in 0..c_in {
                        patches[(j * kk + mu, col)] = input.get(j, rr as usize, cc as usize);
                    }
                }
            }
        }
    }
    let y = weights.apply_patches(&patches);
    let n = out.len();
    let mut data = vec![0.0; weights.c_out() * n];
    for ch in 0..weights.c_out() {
        for p in 0..n {
            data[ch * n + p] = y[(ch, p)] + bias[ch];
        }
    }
    Map { channels: weights.c_out(), region: out, data }
}

fn check_weights(shape: &CnnShape<'_>, weights: &ConvNetworkWeights) -> Result<()> {
    if weights.layers.len() != weights.biases.len() || weights.layers.len() >= shape.channels.len() {
        return Err(Error::mismatch(format!(
            "{} filter layers and {} bias vectors for a network with {} layers",
            weights.layers.len(),
            weights.biases.len(),
            shape.channels.len() - 1
        )));
    }
    for (l, (u, b)) in weights.layers.iter().zip(&weights.biases).enumerate() {
        let (c_out, c_in) = (shape.channels[l + 1], shape.channels[l]);
        if u.c_out() != c_out || u.c_in() != c_in || u.k() != shape.k || b.len() != c_out {
            return Err(Error::mismatch(format!(
                "layer {} has {}x{}x{k}x{k} filters and {} biases, expected {c_out}x{c_in}x{s}x{s}",
                l + 1,
                u.c_out(),
                u.c_in(),
                b.len(),
                k = u.k(),
                s = shape.k
            )));
        }
    }
    Ok(())
}

/// Forward pass computing layer `l` only on `regions[l - 1]`; each region
/// must contain the dilation of the next by `k / 2`.
pub(crate) fn forward_cnn_regions(
    cfg: &NetworkConfig,
    weights: &ConvNetworkWeights,
    x: &Image,
    regions: &[Region],
) -> Result<Vec<Map>> {
    let shape = cnn_shape(cfg)?;
    check_weights(&shape, weights)?;
    if x.shape() != (shape.channels[0], shape.height, shape.width) {
        return Err(Error::mismatch(format!(
            "input image has shape {:?}, expected {:?}",
            x.shape(),
            (shape.channels[0], shape.height, shape.width)
        )));
    }
    let mut maps: Vec<Map> = Vec::with_capacity(regions.len());
    let input = Map::from_image(x);
    for (l, region) in regions.iter().enumerate() {
        let h = {
            let z = maps.last().map(|prev| Map {
                channels: prev.channels,
                region: prev.region,
                data: prev.data.iter().map(|&v| cfg.activation.eval(v)).collect(),
            });
            let z = z.as_ref().unwrap_or(&input);
            conv_layer(&weights.layers[l], &weights.biases[l], z, *region, shape.height, shape.width)
        };
        if h.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: l + 1 });
        }
        maps.push(h);
    }
    Ok(maps)
}

/// Full feature maps `h^(1), ..., h^(m)` for the `m` layers in `weights`.
pub fn forward_cnn(cfg: &NetworkConfig, weights: &ConvNetworkWeights, x: &Image) -> Result<Vec<Image>> {
    let shape = cnn_shape(cfg)?;
    let (h, w) = (shape.height, shape.width);
    let regions = vec![Region::full(h, w); weights.layers.len()];
    Ok(forward_cnn_regions(cfg, weights, x, &regions)?.into_iter().map(|m| m.into_image(h, w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Activation;
    use crate::weights::SamplerSpec;

    fn cfg(channels: Vec<usize>, k: usize, dims: (usize, usize), act: Activation) -> NetworkConfig {
        NetworkConfig::cnn(channels, k, dims, act, 0.0, SamplerSpec::iid_gaussian(1.0)).unwrap()
    }

    #[test]
    fn one_by_one_filter_scales_pixels() {
        let c = cfg(vec![1, 1, 1], 1, (3, 4), Activation::IDENTITY);
        let mut bank = ConvFilterBank::zeros(1, 1, 1);
        bank.set(0, 0, 0, 2.5);
        let w = ConvNetworkWeights::from_banks(vec![bank], vec![vec![0.5]]);
        let x = Image::from_fn(1, 3, 4, |_, r, col| (r * 4 + col) as f64);
        let hs = forward_cnn(&c, &w, &x).unwrap();
        for (got, xv) in hs[0].data.iter().zip(&x.data) {
            assert_eq!(*got, 0.5 + 2.5 * xv);
        }
    }

    #[test]
    fn delta_filter_is_identity() {
        let c = cfg(vec![2, 2, 1], 3, (4, 5), Activation::TANH);
        let mut bank = ConvFilterBank::zeros(2, 2, 3);
        bank.set(0, 0, 4, 1.0);
        bank.set(1, 1, 4, 1.0);
        let w = ConvNetworkWeights::from_banks(vec![bank], vec![vec![0.0; 2]]);
        let x = Image::from_fn(2, 4, 5, |ch, r, col| (ch as f64 + 1.0) * (r as f64 - col as f64));
        assert_eq!(forward_cnn(&c, &w, &x).unwrap()[0], x);
    }

    #[test]
    fn all_ones_filter_on_constant_image() {
        let (cv, b) = (0.7, 0.25);
        let c = cfg(vec![3, 1, 1], 3, (5, 5), Activation::TANH);
        let mut bank = ConvFilterBank::zeros(1, 3, 3);
        for j in 0..3 {
            for mu in 0..9 {
                bank.set(0, j, mu, 1.0);
            }
        }
        let w = ConvNetworkWeights::from_banks(vec![bank], vec![vec![b]]);
        let x = Image::from_fn(3, 5, 5, |_, _, _| cv);
        let h = &forward_cnn(&c, &w, &x).unwrap()[0];
        assert!((h.get(0, 2, 2) - (b + 9.0 * cv * 3.0)).abs() < 1e-12);
        // corner sees 4 in-image pixels
        assert!((h.get(0, 0, 0) - (b + 4.0 * cv * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn windowed_pass_matches_full_pass() {
        let c = NetworkConfig::cnn(
            vec![2, 6, 6, 6, 1],
            3,
            (9, 8),
            Activation::TANH,
            0.1,
            SamplerSpec::new(crate::weights::Family::OrthogonalConv, 1.5),
        )
        .unwrap();
        let w = sample_cnn_weights(&c, &RngSeed::new(4), 3).unwrap();
        let x = Image::from_fn(2, 9, 8, |ch, r, col| ((ch * 31 + r * 7 + col) as f64).sin());
        let full = forward_cnn(&c, &w, &x).unwrap();
        let top = Region::point(1, 6);
        let r2 = top.dilate(1, 9, 8);
        let r1 = r2.dilate(1, 9, 8);
        let maps = forward_cnn_regions(&c, &w, &x, &[r1, r2, top]).unwrap();
        for ch in 0..6 {
            assert!((maps[2].get(ch, 1, 6) - full[2].get(ch, 1, 6)).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_checks() {
        let c = cfg(vec![1, 2, 1], 3, (4, 4), Activation::RELU);
        let w = sample_cnn_weights(&c, &RngSeed::new(0), 2).unwrap();
        assert!(forward_cnn(&c, &w, &Image::zeros(2, 4, 4)).is_err());
        assert!(forward_cnn(&c, &w, &Image::zeros(1, 4, 4)).is_ok());
        let fcn = NetworkConfig::fcn(vec![1, 2, 1], Activation::RELU, 0.0, SamplerSpec::iid_gaussian(1.0)).unwrap();
        assert!(sample_cnn_weights(&fcn, &RngSeed::new(0), 1).is_err());
    }
}
