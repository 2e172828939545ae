//! Flatness/straightness evaluation: total-least-squares fits, PCA residual
//! ratios, reliable-instance selection, median scale alignment, and the
//! standard depth error/accuracy metrics.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::camera::{backproject, Intrinsics, Point3};
use crate::raster::DepthMap;
use crate::regions::{LineSegmentSet, PseudoPlaneSet};
use crate::{Error, Result};

/// Reliable-instance threshold on ground-truth maximum deviation, meters.
pub const RELIABLE_MAX_DEV: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct PlaneFit {
    pub normal: Point3,
    pub centroid: Point3,
    /// Signed orthogonal distances; zero-mean by construction.
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LineFit {
    pub direction: Point3,
    pub centroid: Point3,
    /// Point-to-line distances, non-negative.
    pub deviations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    Plane,
    Line,
}

#[derive(Debug, Clone, Copy)]
pub struct RegularityReport {
    pub avg_dev: f64,
    pub max_dev: f64,
    /// R_plane for planes, R_line for lines.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub rel: f64,
    pub log10: f64,
    pub rms: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

fn centroid(points: &[Point3]) -> Point3 {
    let n = points.len() as f64;
    let mut c = Point3::new(0.0, 0.0, 0.0);
    for p in points {
        c = Point3::new(c.x + p.x, c.y + p.y, c.z + p.z);
    }
    c.scale(1.0 / n)
}

/// Eigen decomposition of the centered covariance, eigenvalues descending.
fn covariance_eigen(points: &[Point3]) -> (Vec<f64>, Vec<Point3>, Point3) {
    let c = centroid(points);
    let mut cov = Matrix3::<f64>::zeros();
    for p in points {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Point3)> = (0..3)
        .map(|i| {
            let v = eig.eigenvectors.column(i);
            (eig.eigenvalues[i], Point3::new(v[0], v[1], v[2]))
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (vals, vecs): (Vec<f64>, Vec<Point3>) = pairs.into_iter().unzip();
    (vals, vecs, c)
}

/// Total-least-squares plane: normal is the eigenvector of the smallest
/// covariance eigenvalue, deviations are signed orthogonal distances.
pub fn tls_plane_fit(points: &[Point3]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("plane fit needs >= 3 points, got {}", points.len())));
    }
    let (_, vecs, c) = covariance_eigen(points);
    let normal = vecs[2];
    let deviations = points.iter().map(|p| p.sub(c).dot(normal)).collect();
    Ok(PlaneFit { normal, centroid: c, deviations })
}

/// Total-least-squares line: direction is the eigenvector of the largest
/// covariance eigenvalue, deviations are orthogonal point-to-line distances.
pub fn tls_line_fit(points: &[Point3]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!("line fit needs >= 2 points, got {}", points.len())));
    }
    let (_, vecs, c) = covariance_eigen(points);
    let dir = vecs[0];
    let deviations = points
        .iter()
        .map(|p| {
            // Rejection-vector norm avoids the cancellation of
            // sqrt(|d|^2 - along^2) for near-collinear clouds.
            let d = p.sub(c);
            let r = d.sub(dir.scale(d.dot(dir)));
            r.norm()
        })
        .collect();
    Ok(LineFit { direction: dir, centroid: c, deviations })
}

/// PCA residual ratios: `(lambda3 / sum, (lambda2 + lambda3) / sum)`.
pub fn pca_residual_ratios(points: &[Point3]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("PCA needs >= 3 points, got {}", points.len())));
    }
    let (vals, _, _) = covariance_eigen(points);
    let sum: f64 = vals.iter().sum();
    if sum == 0.0 {
        // All points coincide; both ratios are vacuously zero.
        return Ok((0.0, 0.0));
    }
    Ok((vals[2] / sum, (vals[1] + vals[2]) / sum))
}

pub fn plane_report(points: &[Point3]) -> Result<RegularityReport> {
    let fit = tls_plane_fit(points)?;
    let (r_plane, _) = pca_residual_ratios(points)?;
    let abs: Vec<f64> = fit.deviations.iter().map(|d| d.abs()).collect();
    Ok(RegularityReport {
        avg_dev: abs.iter().sum::<f64>() / abs.len() as f64,
        max_dev: abs.iter().cloned().fold(0.0, f64::max),
        ratio: r_plane,
    })
}

pub fn line_report(points: &[Point3]) -> Result<RegularityReport> {
    let fit = tls_line_fit(points)?;
    let (_, r_line) = pca_residual_ratios(points)?;
    Ok(RegularityReport {
        avg_dev: fit.deviations.iter().sum::<f64>() / fit.deviations.len() as f64,
        max_dev: fit.deviations.iter().cloned().fold(0.0, f64::max),
        ratio: r_line,
    })
}

/// Reliable instances have strictly sub-0.3 m maximum deviation on the
/// reference depth.
pub fn select_reliable(reports: &[RegularityReport]) -> Vec<bool> {
    reports.iter().map(|r| r.max_dev < RELIABLE_MAX_DEV).collect()
}

/// Scales `pred` by the median of gt/pred over jointly valid pixels.
pub fn median_scale_align(pred: &DepthMap, gt: &DepthMap) -> Result<DepthMap> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::Dimension("prediction and ground truth differ in size".into()));
    }
    let mut ratios: Vec<f64> = pred
        .depth
        .iter()
        .zip(&pred.valid)
        .zip(gt.depth.iter().zip(&gt.valid))
        .filter(|((_, &pv), (_, &gv))| pv && gv)
        .map(|((&p, _), (&g, _))| g / p)
        .collect();
    if ratios.is_empty() {
        return Err(Error::Degenerate("no jointly valid pixels for alignment".into()));
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = ratios.len();
    let scale = if n % 2 == 1 { ratios[n / 2] } else { (ratios[n / 2 - 1] + ratios[n / 2]) / 2.0 };
    let mut out = pred.clone();
    for (z, &ok) in out.depth.iter_mut().zip(&out.valid) {
        if ok {
            *z *= scale;
        }
    }
    Ok(out)
}

/// Standard monocular depth error and threshold-accuracy metrics over the
/// jointly valid pixels.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap) -> Result<DepthMetrics> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(Error::Dimension("prediction and ground truth differ in size".into()));
    }
    let mut n = 0usize;
    let (mut rel, mut log10, mut sq, mut d1, mut d2, mut d3) = (0.0, 0.0, 0.0, 0usize, 0usize, 0usize);
    for i in 0..pred.depth.len() {
        if !(pred.valid[i] && gt.valid[i]) {
            continue;
        }
        let (p, g) = (pred.depth[i], gt.depth[i]);
        rel += (p - g).abs() / g;
        log10 += (p.log10() - g.log10()).abs();
        sq += (p - g) * (p - g);
        let r = (p / g).max(g / p);
        if r < 1.25 {
            d1 += 1;
        }
        if r < 1.25 * 1.25 {
            d2 += 1;
        }
        if r < 1.25 * 1.25 * 1.25 {
            d3 += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Degenerate("no jointly valid pixels".into()));
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        rel: rel / nf,
        log10: log10 / nf,
        rms: (sq / nf).sqrt(),
        d1: d1 as f64 / nf,
        d2: d2 as f64 / nf,
        d3: d3 as f64 / nf,
    })
}

/// One evaluated instance for CSV reporting.
#[derive(Debug, Clone)]
pub struct InstanceEvaluation {
    pub id: usize,
    pub kind: InstanceKind,
    pub n_pixels: usize,
    pub report: Option<RegularityReport>,
}

#[derive(Debug, Clone, Default)]
pub struct RegularitySummary {
    pub instances: Vec<InstanceEvaluation>,
    pub n_skipped: usize,
    pub plane_avg_dev: f64,
    pub plane_max_dev: f64,
    pub plane_ratio: f64,
    pub n_planes: usize,
    pub line_avg_dev: f64,
    pub line_max_dev: f64,
    pub line_ratio: f64,
    pub n_lines: usize,
}

fn instance_points(depth: &DepthMap, k: &Intrinsics, pixels: &[u32]) -> Vec<Point3> {
    pixels
        .iter()
        .filter_map(|&idx| {
            let u = (idx as usize) % depth.width;
            let v = (idx as usize) / depth.width;
            depth.at(u, v).map(|z| backproject(u as f64, v as f64, z, k).unwrap())
        })
        .collect()
}

/// Per-instance fits on the (aligned) predicted point cloud, restricted by a
/// reliable mask computed on reference depth. Instances with fewer than 3
/// valid pixels are skipped and counted.
pub fn evaluate_regularity(
    depth: &DepthMap,
    k: &Intrinsics,
    planes: &PseudoPlaneSet,
    lines: &LineSegmentSet,
    reliable_planes: &[bool],
    reliable_lines: &[bool],
) -> RegularitySummary {
    let mut summary = RegularitySummary::default();
    let mut id = 0usize;
    for (i, pixels) in planes.pixels.iter().enumerate() {
        if !reliable_planes.get(i).copied().unwrap_or(false) {
            continue;
        }
        let points = instance_points(depth, k, pixels);
        let report = plane_report(&points).ok();
        if report.is_none() {
            summary.n_skipped += 1;
        }
        summary.instances.push(InstanceEvaluation {
            id,
            kind: InstanceKind::Plane,
            n_pixels: points.len(),
            report,
        });
        id += 1;
    }
    for (i, seg) in lines.segments.iter().enumerate() {
        if !reliable_lines.get(i).copied().unwrap_or(false) {
            continue;
        }
        let points = instance_points(depth, k, &seg.pixels);
        let report = line_report(&points).ok();
        if report.is_none() {
            summary.n_skipped += 1;
        }
        summary.instances.push(InstanceEvaluation {
            id,
            kind: InstanceKind::Line,
            n_pixels: points.len(),
            report,
        });
        id += 1;
    }
    for inst in &summary.instances {
        let Some(r) = inst.report else { continue };
        match inst.kind {
            InstanceKind::Plane => {
                summary.plane_avg_dev += r.avg_dev;
                summary.plane_max_dev += r.max_dev;
                summary.plane_ratio += r.ratio;
                summary.n_planes += 1;
            }
            InstanceKind::Line => {
                summary.line_avg_dev += r.avg_dev;
                summary.line_max_dev += r.max_dev;
                summary.line_ratio += r.ratio;
                summary.n_lines += 1;
            }
        }
    }
    if summary.n_planes > 0 {
        let n = summary.n_planes as f64;
        summary.plane_avg_dev /= n;
        summary.plane_max_dev /= n;
        summary.plane_ratio /= n;
    }
    if summary.n_lines > 0 {
        let n = summary.n_lines as f64;
        summary.line_avg_dev /= n;
        summary.line_max_dev /= n;
        summary.line_ratio /= n;
    }
    summary
}
