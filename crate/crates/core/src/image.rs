//! Floating-point raster used for clean images, degraded images and diffusion states.

use crate::error::{invalid, Error, Result};

/// An `H x W x C` raster stored row-major with interleaved channels.
///
/// Nominal range is `[0, 1]`, but diffusion states routinely leave it, so only
/// finiteness is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("dims", format!("{height}x{width} has a zero side")));
        }
        if channels != 1 && channels != 3 {
            return Err(invalid("channels", format!("{channels} (expected 1 or 3)")));
        }
        if data.len() != height * width * channels {
            return Err(invalid(
                "data",
                format!(
                    "length {} != {height}*{width}*{channels}",
                    data.len()
                ),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid("data", format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds an image from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// A single-pixel, single-channel image; handy for scalar SDE arithmetic.
    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(1, 1, 1, vec![value])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    pub fn check_same_shape(&self, other: &ImageBuffer) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    /// Applies `f` per sample. The result is re-validated for finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ImageBuffer> {
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_map(&self, other: &ImageBuffer, f: impl Fn(f64, f64) -> f64) -> Result<ImageBuffer> {
        self.check_same_shape(other)?;
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn zip3_map(
        &self,
        b: &ImageBuffer,
        c: &ImageBuffer,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<ImageBuffer> {
        self.check_same_shape(b)?;
        self.check_same_shape(c)?;
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.data
                .iter()
                .zip(&b.data)
                .zip(&c.data)
                .map(|((&x, &y), &z)| f(x, y, z))
                .collect(),
        )
    }

    pub fn clamp01(&self) -> ImageBuffer {
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Extracts one channel as a row-major plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Reassembles an image from per-channel planes of equal size.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        if planes.iter().any(|p| p.len() != height * width) {
            return Err(invalid("planes", "plane length does not match dims"));
        }
        let mut data = Vec::with_capacity(height * width * channels);
        for i in 0..height * width {
            for p in planes {
                data.push(p[i]);
            }
        }
        Self::new(height, width, channels, data)
    }

    /// BT.601 luma for RGB, identity for grayscale.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.data.clone();
        }
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }
}

impl std::ops::Index<usize> for ImageBuffer {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}
