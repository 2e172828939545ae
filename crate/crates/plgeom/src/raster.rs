//! Row-major scalar rasters and depth maps with validity masks.

use crate::{Error, Result};

/// Row-major raster, `channels` interleaved scalars per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "raster data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("raster contains non-finite values".into()));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self { width, height, channels, data: vec![value; width * height * channels] }
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> f32 {
        self.data[(v * self.width + u) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, c: usize, value: f32) {
        self.data[(v * self.width + u) * self.channels + c] = value;
    }

    pub fn same_dims(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Mean intensity across channels at one pixel.
    #[inline]
    pub fn luma(&self, u: usize, v: usize) -> f32 {
        let base = (v * self.width + u) * self.channels;
        let mut s = 0.0;
        for c in 0..self.channels {
            s += self.data[base + c];
        }
        s / self.channels as f32
    }
}

/// Per-pixel positive depth in meters plus a validity mask.
///
/// Invalid pixels carry depth 0 in serialized form and `valid = false` here.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// Build from raw depths; non-positive or non-finite entries become invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "depth length {} != {}x{}",
                values.len(),
                width,
                height
            )));
        }
        let valid = values.iter().map(|&z| z.is_finite() && z > 0.0).collect();
        Ok(Self { width, height, depth: values, valid })
    }

    pub fn constant(width: usize, height: usize, z: f64) -> Self {
        assert!(z > 0.0);
        Self {
            width,
            height,
            depth: vec![z; width * height],
            valid: vec![true; width * height],
        }
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Option<f64> {
        let i = v * self.width + u;
        if self.valid[i] {
            Some(self.depth[i])
        } else {
            None
        }
    }

    pub fn to_raster(&self) -> Raster {
        let data = self
            .depth
            .iter()
            .zip(&self.valid)
            .map(|(&z, &ok)| if ok { z as f32 } else { 0.0 })
            .collect();
        Raster { width: self.width, height: self.height, channels: 1, data }
    }

    /// Inverse of `to_raster`: zeros become invalid pixels.
    pub fn from_raster(r: &Raster) -> Result<Self> {
        if r.channels != 1 {
            return Err(Error::Dimension(format!(
                "depth raster must be 1-channel, got {}",
                r.channels
            )));
        }
        Self::from_values(r.width, r.height, r.data.iter().map(|&v| v as f64).collect())
    }
}
