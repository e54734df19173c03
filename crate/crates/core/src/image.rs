//! Row-major interleaved `f64` image buffers.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn filled(width: usize, height: usize, value: &[f64]) -> Self {
        let channels = value.len();
        let mut data = Vec::with_capacity(width * height * channels);
        for _ in 0..width * height {
            data.extend_from_slice(value);
        }
        Self { width, height, channels, data }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} values for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y) + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = self.index(x, y);
        &mut self.data[i..i + self.channels]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image { data: self.data.iter().map(|&v| f(v)).collect(), ..*self }
    }

    pub fn clamped01(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_row_major() {
        let mut img = Image::new(3, 2, 3);
        img.pixel_mut(2, 1)[1] = 5.0;
        assert_eq!(img.data[(3 + 2) * 3 + 1], 5.0);
        assert_eq!(img.get(2, 1, 1), 5.0);
        assert_eq!(img.channel(1).get(2, 1, 0), 5.0);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Image::from_vec(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Image::from_vec(2, 2, 3, vec![0.0; 12]).is_ok());
    }
}
