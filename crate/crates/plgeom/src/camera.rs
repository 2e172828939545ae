//! Pinhole intrinsics and pixel/camera-frame transforms.
//!
//! Pixel convention: pixel centers at integer coordinates, origin at the
//! top-left pixel center.

use crate::{Error, Result};

/// Pinhole intrinsic parameters in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Degenerate(format!("focal lengths must be positive: fx={fx}, fy={fy}")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::Degenerate("principal point must be finite".into()));
        }
        Ok(Self { fx, fy, cx, cy })
    }
}

/// 3D point in the camera frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn scale(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Normalized image coordinate `((u-cx)/fx, (v-cy)/fy, 1)`.
#[inline]
pub fn normalize_pixel(u: f64, v: f64, k: &Intrinsics) -> (f64, f64, f64) {
    ((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
}

/// Inverse of `normalize_pixel`.
#[inline]
pub fn denormalize(xn: f64, yn: f64, k: &Intrinsics) -> (f64, f64) {
    (xn * k.fx + k.cx, yn * k.fy + k.cy)
}

/// Lift a pixel at depth `z` to the camera frame: `(z*xn, z*yn, z)`.
pub fn backproject(u: f64, v: f64, z: f64, k: &Intrinsics) -> Result<Point3> {
    if !(z > 0.0) {
        return Err(Error::Degenerate(format!("depth must be positive, got {z}")));
    }
    let (xn, yn, _) = normalize_pixel(u, v, k);
    Ok(Point3::new(z * xn, z * yn, z))
}

/// Project a camera-frame point to pixel coordinates. `None` for z <= 0.
pub fn project(p: Point3, k: &Intrinsics) -> Option<(f64, f64)> {
    if p.z <= 0.0 {
        return None;
    }
    Some(denormalize(p.x / p.z, p.y / p.z, k))
}
