//! View synthesis: rigid warping, bilinear sampling, photometric loss, and
//! edge-aware disparity smoothness.

use crate::camera::{denormalize, normalize_pixel, Intrinsics, Point3};
use crate::raster::{DepthMap, Raster};
use crate::{Error, Result};

/// Rigid transform target -> source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub r: [[f64; 3]; 3],
    pub t: [f64; 3],
}

impl Pose {
    pub fn new(r: [[f64; 3]; 3], t: [f64; 3]) -> Result<Self> {
        // Orthonormality: R^T R = I to 1e-9.
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > 1e-9 {
                    return Err(Error::Degenerate(format!(
                        "rotation is not orthonormal: (R^T R)[{i}][{j}] = {dot}"
                    )));
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::Degenerate(format!("rotation determinant {det} != 1")));
        }
        Ok(Self { r, t })
    }

    pub fn identity() -> Self {
        Self { r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], t: [0.0; 3] }
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::new(
            self.r[0][0] * p.x + self.r[0][1] * p.y + self.r[0][2] * p.z + self.t[0],
            self.r[1][0] * p.x + self.r[1][1] * p.y + self.r[1][2] * p.z + self.t[1],
            self.r[2][0] * p.x + self.r[2][1] * p.y + self.r[2][2] * p.z + self.t[2],
        )
    }

    /// Applies `R * p + s * t`; used with `s = 1/z` to warp rays.
    fn apply_scaled(&self, p: Point3, s: f64) -> Point3 {
        Point3::new(
            self.r[0][0] * p.x + self.r[0][1] * p.y + self.r[0][2] * p.z + s * self.t[0],
            self.r[1][0] * p.x + self.r[1][1] * p.y + self.r[1][2] * p.z + s * self.t[1],
            self.r[2][0] * p.x + self.r[2][1] * p.y + self.r[2][2] * p.z + s * self.t[2],
        )
    }

    pub fn inverse(&self) -> Self {
        let r = self.r;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let t = [
            -(rt[0][0] * self.t[0] + rt[0][1] * self.t[1] + rt[0][2] * self.t[2]),
            -(rt[1][0] * self.t[0] + rt[1][1] * self.t[1] + rt[1][2] * self.t[2]),
            -(rt[2][0] * self.t[0] + rt[2][1] * self.t[1] + rt[2][2] * self.t[2]),
        ];
        Self { r: rt, t }
    }
}

/// Per-pixel source coordinates with an in-bounds/positive-depth flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Maps every target pixel to its source-view coordinate through depth and
/// rigid pose. Pixels with invalid depth, non-positive transformed depth, or
/// out-of-bounds landing are flagged invalid.
pub fn warp_flow(depth: &DepthMap, k: &Intrinsics, pose: &Pose) -> FlowField {
    let (w, h) = (depth.width, depth.height);
    let n = w * h;
    let mut fu = vec![0.0; n];
    let mut fv = vec![0.0; n];
    let mut valid = vec![false; n];
    let is_identity = *pose == Pose::identity();
    for vv in 0..h {
        for uu in 0..w {
            let i = vv * w + uu;
            let Some(z) = depth.at(uu, vv) else { continue };
            if is_identity {
                // Identity flow is the identity on pixel coordinates exactly.
                fu[i] = uu as f64;
                fv[i] = vv as f64;
                valid[i] = true;
                continue;
            }
            let (xn, yn, _) = normalize_pixel(uu as f64, vv as f64, k);
            // Work in ray space: q = R * pn + t / z keeps the homogeneous
            // scale near 1 and divides out z before any rounding can grow.
            let p = pose.apply_scaled(Point3::new(xn, yn, 1.0), 1.0 / z);
            if p.z <= 0.0 {
                continue;
            }
            let (us, vs) = denormalize(p.x / p.z, p.y / p.z, k);
            fu[i] = us;
            fv[i] = vs;
            valid[i] =
                us >= 0.0 && us <= (w - 1) as f64 && vs >= 0.0 && vs <= (h - 1) as f64;
        }
    }
    FlowField { width: w, height: h, u: fu, v: fv, valid }
}

/// Bilinear interpolation of `source` at the flow coordinates. Output is the
/// sampled raster plus the mask of pixels that produced a value.
pub fn bilinear_sample(source: &Raster, flow: &FlowField) -> Result<(Raster, Vec<bool>)> {
    if source.width != flow.width || source.height != flow.height {
        return Err(Error::Dimension("flow dimensions do not match source".into()));
    }
    let (w, h, ch) = (source.width, source.height, source.channels);
    let mut out = Raster::filled(w, h, ch, 0.0);
    let mut mask = vec![false; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if !flow.valid[i] {
                continue;
            }
            let (us, vs) = (flow.u[i], flow.v[i]);
            let u0 = (us.floor() as usize).min(w - 1);
            let v0 = (vs.floor() as usize).min(h - 1);
            let u1 = (u0 + 1).min(w - 1);
            let v1 = (v0 + 1).min(h - 1);
            let fu = (us - u0 as f64) as f32;
            let fv = (vs - v0 as f64) as f32;
            for c in 0..ch {
                let a = source.get(u0, v0, c) * (1.0 - fu) + source.get(u1, v0, c) * fu;
                let b = source.get(u0, v1, c) * (1.0 - fu) + source.get(u1, v1, c) * fu;
                out.set(u, v, c, a * (1.0 - fv) + b * fv);
            }
            mask[i] = true;
        }
    }
    Ok((out, mask))
}

#[derive(Debug, Clone, Copy)]
pub struct PhotometricConfig {
    /// SSIM mixing weight.
    pub alpha: f64,
    /// Box window radius; 1 gives the 3x3 window.
    pub window_radius: usize,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        // Stabilizers for a [0,1] dynamic range.
        Self { alpha: 0.85, window_radius: 1, c1: 0.01 * 0.01, c2: 0.03 * 0.03 }
    }
}

/// Box-filtered local mean with edge replication.
fn box_mean(values: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut out = vec![0.0; w * h];
    for v in 0..h as isize {
        for u in 0..w as isize {
            let mut s = 0.0;
            for dv in -r..=r {
                let vv = (v + dv).clamp(0, h as isize - 1) as usize;
                for du in -r..=r {
                    let uu = (u + du).clamp(0, w as isize - 1) as usize;
                    s += values[vv * w + uu];
                }
            }
            let n = (2 * r + 1) * (2 * r + 1);
            out[v as usize * w + u as usize] = s / n as f64;
        }
    }
    out
}

/// Per-pixel SSIM between two rasters of equal dimensions. Multi-channel
/// inputs are reduced to the channel mean first.
pub fn ssim(a: &Raster, b: &Raster, cfg: &PhotometricConfig) -> Result<Vec<f64>> {
    if !a.same_dims(b) {
        return Err(Error::Dimension("ssim inputs differ in dimensions".into()));
    }
    let (w, h) = (a.width, a.height);
    let la: Vec<f64> = (0..h)
        .flat_map(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| a.luma(u, v) as f64)
        .collect();
    let lb: Vec<f64> = (0..h)
        .flat_map(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| b.luma(u, v) as f64)
        .collect();
    let aa: Vec<f64> = la.iter().map(|x| x * x).collect();
    let bb: Vec<f64> = lb.iter().map(|x| x * x).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();

    let mu_a = box_mean(&la, w, h, cfg.window_radius);
    let mu_b = box_mean(&lb, w, h, cfg.window_radius);
    let m_aa = box_mean(&aa, w, h, cfg.window_radius);
    let m_bb = box_mean(&bb, w, h, cfg.window_radius);
    let m_ab = box_mean(&ab, w, h, cfg.window_radius);

    Ok((0..w * h)
        .map(|i| {
            let va = m_aa[i] - mu_a[i] * mu_a[i];
            let vb = m_bb[i] - mu_b[i] * mu_b[i];
            let cov = m_ab[i] - mu_a[i] * mu_b[i];
            ((2.0 * mu_a[i] * mu_b[i] + cfg.c1) * (2.0 * cov + cfg.c2))
                / ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + cfg.c1) * (va + vb + cfg.c2))
        })
        .collect())
}

/// Mixed SSIM/L1 photometric error over the valid mask.
pub fn photometric_loss(
    target: &Raster,
    synthesized: &Raster,
    mask: Option<&[bool]>,
    cfg: &PhotometricConfig,
) -> Result<f64> {
    if !target.same_dims(synthesized) {
        return Err(Error::Dimension("photometric inputs differ in dimensions".into()));
    }
    let s = ssim(target, synthesized, cfg)?;
    let (w, h) = (target.width, target.height);
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if let Some(m) = mask {
                if !m[i] {
                    continue;
                }
            }
            let l1 = (target.luma(u, v) as f64 - synthesized.luma(u, v) as f64).abs();
            sum += cfg.alpha * (1.0 - s[i]) / 2.0 + (1.0 - cfg.alpha) * l1;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Degenerate("photometric loss over empty valid set".into()));
    }
    Ok(sum / count as f64)
}

/// Edge-aware smoothness of mean-normalized disparity: forward differences,
/// last column/row excluded per axis, gradients down-weighted by the image
/// gradient magnitude.
pub fn disparity_smoothness(disp: &Raster, image: &Raster) -> Result<f64> {
    if disp.width != image.width || disp.height != image.height || disp.channels != 1 {
        return Err(Error::Dimension("disparity smoothness dimension mismatch".into()));
    }
    let (w, h) = (disp.width, disp.height);
    let mean: f64 = disp.data.iter().map(|&d| d as f64).sum::<f64>() / (w * h) as f64;
    if mean == 0.0 {
        return Err(Error::Degenerate("disparity mean is zero".into()));
    }
    Ok(edge_aware_gradient_mean(&disp.data.iter().map(|&d| d as f64 / mean).collect::<Vec<_>>(), image, w, h))
}

/// Shared kernel for Eq.-style edge-aware first-difference penalties: mean of
/// |du f| e^{-|du I|} over the interior columns plus mean of |dv f| e^{-|dv I|}
/// over the interior rows.
pub(crate) fn edge_aware_gradient_mean(field: &[f64], image: &Raster, w: usize, h: usize) -> f64 {
    let mut sum_u = 0.0;
    for v in 0..h {
        for u in 0..w - 1 {
            let df = (field[v * w + u + 1] - field[v * w + u]).abs();
            let di = (image.luma(u + 1, v) as f64 - image.luma(u, v) as f64).abs();
            sum_u += df * (-di).exp();
        }
    }
    let mut sum_v = 0.0;
    for v in 0..h - 1 {
        for u in 0..w {
            let df = (field[(v + 1) * w + u] - field[v * w + u]).abs();
            let di = (image.luma(u, v + 1) as f64 - image.luma(u, v) as f64).abs();
            sum_v += df * (-di).exp();
        }
    }
    let mut total = 0.0;
    if w > 1 {
        total += sum_u / ((w - 1) * h) as f64;
    }
    if h > 1 {
        total += sum_v / (w * (h - 1)) as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap()
    }

    #[test]
    fn identity_pose_identity_flow() {
        let d = DepthMap::constant(8, 6, 1.7);
        let flow = warp_flow(&d, &k(), &Pose::identity());
        for v in 0..6 {
            for u in 0..8 {
                let i = v * 8 + u;
                assert!(flow.valid[i]);
                assert_eq!(flow.u[i], u as f64);
                assert_eq!(flow.v[i], v as f64);
            }
        }
    }

    #[test]
    fn lateral_translation_shifts_by_fx_tx_over_z() {
        let d = DepthMap::constant(640, 480, 1.0);
        let pose = Pose::new(Pose::identity().r, [0.1, 0.0, 0.0]).unwrap();
        let flow = warp_flow(&d, &k(), &pose);
        // Delta u = fx*tx/Z = 50 everywhere (landing may go out of bounds on
        // the right edge; check an interior pixel).
        let i = 240 * 640 + 100;
        assert!(flow.valid[i]);
        assert_relative_eq!(flow.u[i], 150.0, epsilon = 1e-6);
        assert_relative_eq!(flow.v[i], 240.0, epsilon = 1e-6);
    }

    #[test]
    fn forward_motion_fixes_optical_axis() {
        let d = DepthMap::constant(640, 480, 1.0);
        let pose = Pose::new(Pose::identity().r, [0.0, 0.0, -0.5]).unwrap();
        let flow = warp_flow(&d, &k(), &pose);
        let i = 240 * 640 + 320;
        assert!(flow.valid[i]);
        assert_relative_eq!(flow.u[i], 320.0, epsilon = 1e-9);
        assert_relative_eq!(flow.v[i], 240.0, epsilon = 1e-9);
    }

    #[test]
    fn pose_rejects_non_rotation() {
        assert!(Pose::new([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0; 3]).is_err());
        // Reflection: orthonormal but det = -1.
        assert!(Pose::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]], [0.0; 3]).is_err());
    }

    #[test]
    fn bilinear_identity() {
        let src = Raster::new(2, 2, 1, vec![0.1, 0.7, 0.3, 0.9]).unwrap();
        let d = DepthMap::constant(2, 2, 1.0);
        let flow = warp_flow(&d, &k(), &Pose::identity());
        let (out, mask) = bilinear_sample(&src, &flow).unwrap();
        assert_eq!(out.data, src.data);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn bilinear_midpoint_and_quarter() {
        let src = Raster::new(2, 1, 1, vec![0.0, 4.0]).unwrap();
        let flow = FlowField {
            width: 2,
            height: 1,
            u: vec![0.5, 0.25],
            v: vec![0.0, 0.0],
            valid: vec![true, true],
        };
        let (out, _) = bilinear_sample(&src, &flow).unwrap();
        assert_relative_eq!(out.data[0] as f64, 2.0, epsilon = 1e-6);
        assert_relative_eq!(out.data[1] as f64, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn ssim_identical_is_one() {
        let a = Raster::new(4, 4, 1, (0..16).map(|i| i as f32 / 16.0).collect()).unwrap();
        let s = ssim(&a, &a, &PhotometricConfig::default()).unwrap();
        for v in s {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    /// Closed-form SSIM of two constant images a, b:
    /// (2ab + c1) c2 / ((a^2 + b^2 + c1) c2).
    fn constant_ssim(a: f64, b: f64, cfg: &PhotometricConfig) -> f64 {
        (2.0 * a * b + cfg.c1) / (a * a + b * b + cfg.c1)
    }

    #[test]
    fn ssim_constant_zero_vs_one() {
        let cfg = PhotometricConfig::default();
        let a = Raster::filled(5, 5, 1, 0.0);
        let b = Raster::filled(5, 5, 1, 1.0);
        let s = ssim(&a, &b, &cfg).unwrap();
        let expected = constant_ssim(0.0, 1.0, &cfg);
        assert!(expected < 0.01);
        for v in s {
            assert_relative_eq!(v, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn ssim_tiny_offset_near_one() {
        let cfg = PhotometricConfig::default();
        let a = Raster::filled(4, 4, 1, 0.5);
        let b = Raster::filled(4, 4, 1, 0.5 + 1e-6);
        let s = ssim(&a, &b, &cfg).unwrap();
        let expected = constant_ssim(0.5, 0.5 + 1e-6, &cfg);
        for v in s {
            assert!(v >= 0.999);
            assert_relative_eq!(v, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn photometric_identical_zero() {
        let a = Raster::new(4, 4, 1, (0..16).map(|i| i as f32 / 16.0).collect()).unwrap();
        let l = photometric_loss(&a, &a, None, &PhotometricConfig::default()).unwrap();
        assert_relative_eq!(l, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn photometric_pure_l1() {
        let cfg = PhotometricConfig { alpha: 0.0, ..Default::default() };
        let a = Raster::filled(4, 4, 1, 0.3);
        let b = Raster::filled(4, 4, 1, 0.5);
        let l = photometric_loss(&a, &b, None, &cfg).unwrap();
        assert_relative_eq!(l, 0.2, epsilon = 1e-7);
    }

    #[test]
    fn photometric_pure_ssim_constants() {
        let cfg = PhotometricConfig { alpha: 1.0, ..Default::default() };
        let a = Raster::filled(4, 4, 1, 0.0);
        let b = Raster::filled(4, 4, 1, 1.0);
        let l = photometric_loss(&a, &b, None, &cfg).unwrap();
        assert_relative_eq!(l, (1.0 - constant_ssim(0.0, 1.0, &cfg)) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn photometric_empty_mask_errors() {
        let a = Raster::filled(2, 2, 1, 0.5);
        let mask = vec![false; 4];
        assert!(photometric_loss(&a, &a, Some(&mask), &PhotometricConfig::default()).is_err());
    }

    #[test]
    fn smoothness_constant_zero() {
        let d = Raster::filled(5, 5, 1, 2.0);
        let img = Raster::filled(5, 5, 1, 0.5);
        assert_relative_eq!(disparity_smoothness(&d, &img).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn smoothness_scale_invariant() {
        let mut d = Raster::filled(5, 4, 1, 0.0);
        for v in 0..4 {
            for u in 0..5 {
                d.set(u, v, 0, 1.0 + 0.1 * u as f32 + 0.05 * v as f32);
            }
        }
        let img = Raster::filled(5, 4, 1, 0.25);
        let l1 = disparity_smoothness(&d, &img).unwrap();
        let scaled = Raster::new(5, 4, 1, d.data.iter().map(|x| x * 7.0).collect()).unwrap();
        let l2 = disparity_smoothness(&scaled, &img).unwrap();
        assert_relative_eq!(l1, l2, max_relative = 1e-6);
    }

    #[test]
    fn smoothness_ramp_closed_form() {
        // d(u) = 1 + u/W on a constant image; d* = d/mean, du d* = (1/W)/mean.
        let w = 10usize;
        let h = 3usize;
        let data: Vec<f32> =
            (0..h).flat_map(|_| (0..w).map(|u| 1.0 + u as f32 / w as f32)).collect();
        let d = Raster::new(w, h, 1, data).unwrap();
        let img = Raster::filled(w, h, 1, 0.5);
        let mean = (0..w).map(|u| 1.0 + u as f64 / w as f64).sum::<f64>() / w as f64;
        let expected = (1.0 / w as f64) / mean;
        assert_relative_eq!(disparity_smoothness(&d, &img).unwrap(), expected, max_relative = 1e-5);
    }

    #[test]
    fn warp_composition_round_trip() {
        // Fronto-parallel plane at Z=2; warp by pose P, recompute depth in the
        // source frame (still 2 - tz for this plane), warp back by P^-1.
        let kk = k();
        let d = DepthMap::constant(64, 48, 2.0);
        let angle: f64 = 0.01;
        let (c, s) = (angle.cos(), angle.sin());
        let pose = Pose::new([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]], [0.02, -0.01, 0.05])
            .unwrap();
        let flow = warp_flow(&d, &kk, &pose);
        let inv = pose.inverse();
        for v in 0..48 {
            for u in 0..64 {
                let i = v * 64 + u;
                if !flow.valid[i] {
                    continue;
                }
                // Depth of the warped point in the source frame.
                let (xn, yn, _) = normalize_pixel(u as f64, v as f64, &kk);
                let p_src = pose.apply(Point3::new(2.0 * xn, 2.0 * yn, 2.0));
                let back = inv.apply(p_src);
                let (ub, vb) = denormalize(back.x / back.z, back.y / back.z, &kk);
                assert_relative_eq!(ub, u as f64, epsilon = 1e-6);
                assert_relative_eq!(vb, v as f64, epsilon = 1e-6);
            }
        }
    }
}
