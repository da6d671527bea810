//! Multi-channel images stored channel-major, then row-major.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(Error::mismatch(format!(
                "image data has {} values, expected {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Image { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Image { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for r in 0..height {
                for col in 0..width {
                    data.push(f(c, r, col));
                }
            }
        }
        Image { channels, height, width, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, c: usize, r: usize, col: usize) -> usize {
        (c * self.height + r) * self.width + col
    }

    #[inline]
    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.data[self.index(c, r, col)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, r: usize, col: usize, v: f64) {
        let i = self.index(c, r, col);
        self.data[i] = v;
    }

    pub(crate) fn check_same_shape(images: &[Image]) -> Result<(usize, usize, usize)> {
        let first = images.first().ok_or_else(|| Error::invalid("no images given"))?;
        for (i, img) in images.iter().enumerate() {
            if img.shape() != first.shape() {
                return Err(Error::mismatch(format!(
                    "image {i} has shape {:?}, expected {:?}",
                    img.shape(),
                    first.shape()
                )));
            }
        }
        Ok(first.shape())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_channel_major() {
        let img = Image::from_fn(2, 3, 4, |c, r, col| (100 * c + 10 * r + col) as f64);
        assert_eq!(img.get(1, 2, 3), 123.0);
        assert_eq!(img.data[img.index(1, 0, 0)], 100.0);
        assert!(Image::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(Image::check_same_shape(&[img.clone(), Image::zeros(2, 3, 3)]).is_err());
    }
}
