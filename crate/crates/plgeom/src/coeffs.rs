//! Planar-coefficient depth parameterization.
//!
//! An observable plane `n . X = h` (not through the camera center) is encoded
//! as the coefficient vector `co = n / h`; the dot product of `co` with the
//! normalized image coordinate is the inverse depth at that pixel. Raw
//! unconstrained 3-vectors are modulated by halving their angle to the view
//! ray so the resulting inverse depth is positive.

use crate::camera::{normalize_pixel, Intrinsics, Point3};
use crate::raster::{DepthMap, Raster};
use crate::{Error, Result};

/// Inverse-depth floor; keeps the conversion total (depth cap 1e4 m).
pub const EPS_INV_DEPTH: f64 = 1e-4;

/// Planar coefficient vector, units 1/meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeff {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Coeff {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Per-pixel coefficient field, row-major with x, y, z interleaved. Stored in
/// f64 so plane round trips hold to machine precision; the PFM interchange
/// form is single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl CoeffMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "coefficient map data length {} != {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: usize, height: usize, co: Coeff) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&[co.x, co.y, co.z]);
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Coeff {
        let i = (v * self.width + u) * 3;
        Coeff::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_raster(raster: &Raster) -> Result<Self> {
        if raster.channels != 3 {
            return Err(Error::Dimension(format!(
                "coefficient map must be 3-channel, got {}",
                raster.channels
            )));
        }
        Ok(Self {
            width: raster.width,
            height: raster.height,
            data: raster.data.iter().map(|&v| v as f64).collect(),
        })
    }
}

/// Halves the angle between a raw output vector and the view ray `pn`,
/// guaranteeing a positive dot product for any non-antiparallel input:
/// `co = raw + (|raw|/|pn|) * pn`. The exactly antiparallel case yields the
/// zero vector, which downstream clamping absorbs.
pub fn modulate(raw: [f64; 3], pn: (f64, f64, f64)) -> Coeff {
    let raw_norm = (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt();
    let pn_norm = (pn.0 * pn.0 + pn.1 * pn.1 + pn.2 * pn.2).sqrt();
    let s = raw_norm / pn_norm;
    Coeff::new(raw[0] + s * pn.0, raw[1] + s * pn.1, raw[2] + s * pn.2)
}

/// Inverse depth at a pixel: `max(co . pn, EPS_INV_DEPTH)`.
#[inline]
pub fn coeffs_to_inv_depth(co: Coeff, pn: (f64, f64, f64)) -> f64 {
    (co.x * pn.0 + co.y * pn.1 + co.z * pn.2).max(EPS_INV_DEPTH)
}

/// Coefficients of the plane `n . X = h`. Rejects h = 0: a camera cannot
/// observe a plane through its own center.
pub fn plane_to_coeffs(normal: Point3, offset: f64) -> Result<Coeff> {
    if offset == 0.0 || !offset.is_finite() {
        return Err(Error::Degenerate(format!("plane offset must be nonzero and finite, got {offset}")));
    }
    Ok(Coeff::new(normal.x / offset, normal.y / offset, normal.z / offset))
}

/// Per-pixel depth map from a coefficient map.
pub fn coeff_map_to_depth(coeffs: &CoeffMap, k: &Intrinsics) -> Result<DepthMap> {
    let (w, h) = (coeffs.width, coeffs.height);
    let mut depth = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let pn = normalize_pixel(u as f64, v as f64, k);
            depth.push(1.0 / coeffs_to_inv_depth(coeffs.at(u, v), pn));
        }
    }
    DepthMap::from_values(w, h, depth)
}
