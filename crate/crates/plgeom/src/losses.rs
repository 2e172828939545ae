//! Plane/line prior losses: coefficient smoothness, random-sample planar and
//! linear consistency with analytic gradients, the combined objective, and
//! the least-square-fit baseline used for the robustness comparison.

use rand::Rng;

use crate::camera::{normalize_pixel, Intrinsics, Point3};
use crate::coeffs::CoeffMap;
use crate::raster::{DepthMap, Raster};
use crate::regions::{allocate_samples, sample_point_sets, LineSegmentSet, PseudoPlaneSet};
use crate::view::edge_aware_gradient_mean;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub alpha_cos: f64,
    pub alpha_pc: f64,
    pub alpha_lc: f64,
    /// 4-point set budget for planar consistency.
    pub n_p: usize,
    /// 3-point set budget for linear consistency.
    pub n_l: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha_cos: 0.2, alpha_pc: 2.0, alpha_lc: 0.5, n_p: 512, n_l: 128 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LossBreakdown {
    pub l_pe: f64,
    pub l_ds: f64,
    pub l_cos: f64,
    pub l_pc: f64,
    pub l_lc: f64,
    pub total: f64,
    /// Set when planar/linear consistency had no eligible instances.
    pub pc_empty: bool,
    pub lc_empty: bool,
}

/// Partial derivative of a consistency loss with respect to depth at the
/// sampled pixels, sparse and sorted by linear pixel index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseDepthGradient {
    pub entries: Vec<(u32, f64)>,
}

impl SparseDepthGradient {
    fn from_accumulator(mut acc: Vec<(u32, f64)>) -> Self {
        acc.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(acc.len());
        for (i, g) in acc {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += g,
                _ => entries.push((i, g)),
            }
        }
        entries
            .retain(|&(_, g)| g != 0.0);
        Self { entries }
    }
}

/// Edge-aware smoothness on absolute-mean-normalized coefficient channels,
/// summed over the three channels. A channel that is identically zero
/// contributes nothing.
pub fn coeff_smoothness(coeffs: &CoeffMap, image: &Raster) -> Result<f64> {
    let (w, h) = (coeffs.width, coeffs.height);
    if w != image.width || h != image.height {
        return Err(Error::Dimension("coefficient smoothness dimension mismatch".into()));
    }
    let n = w * h;
    let mut total = 0.0;
    for c in 0..3 {
        let channel: Vec<f64> = (0..n).map(|i| coeffs.data[i * 3 + c]).collect();
        let abs_mean = channel.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        if abs_mean == 0.0 {
            continue;
        }
        let normalized: Vec<f64> = channel.iter().map(|v| v / abs_mean).collect();
        total += edge_aware_gradient_mean(&normalized, image, w, h);
    }
    Ok(total)
}

/// Parallelepiped volume spanned by four points, |det[B-A, C-A, D-A]|, and
/// its gradient with respect to each point. Subgradient 0 on the coplanar set.
pub fn planar_term(a: Point3, b: Point3, c: Point3, d: Point3) -> (f64, [Point3; 4]) {
    let ab = b.sub(a);
    let ac = c.sub(a);
    let ad = d.sub(a);
    let det = ab.dot(ac.cross(ad));
    let sign = if det > 0.0 {
        1.0
    } else if det < 0.0 {
        -1.0
    } else {
        return (0.0, [Point3::new(0.0, 0.0, 0.0); 4]);
    };
    let gb = ac.cross(ad).scale(sign);
    let gc = ad.cross(ab).scale(sign);
    let gd = ab.cross(ac).scale(sign);
    let ga = Point3::new(-(gb.x + gc.x + gd.x), -(gb.y + gc.y + gd.y), -(gb.z + gc.z + gd.z));
    (det.abs(), [ga, gb, gc, gd])
}

/// Parallelogram area spanned by three points, ||(F-E) x (G-E)||, and its
/// gradient. Subgradient 0 on the collinear set.
pub fn linear_term(e: Point3, f: Point3, g: Point3) -> (f64, [Point3; 3]) {
    let ef = f.sub(e);
    let eg = g.sub(e);
    let v = ef.cross(eg);
    let val = v.norm();
    if val == 0.0 {
        return (0.0, [Point3::new(0.0, 0.0, 0.0); 3]);
    }
    let vh = v.scale(1.0 / val);
    let gf = eg.cross(vh);
    let gg = vh.cross(ef);
    let ge = Point3::new(-(gf.x + gg.x), -(gf.y + gg.y), -(gf.z + gg.z));
    (val, [ge, gf, gg])
}

fn lift(depth: &DepthMap, k: &Intrinsics, pixel: u32) -> Option<(Point3, (f64, f64, f64))> {
    let u = (pixel as usize) % depth.width;
    let v = (pixel as usize) / depth.width;
    let z = depth.at(u, v)?;
    let pn = normalize_pixel(u as f64, v as f64, k);
    Some((Point3::new(z * pn.0, z * pn.1, z), pn))
}

fn consistency_loss(
    depth: &DepthMap,
    k: &Intrinsics,
    instances: &[Vec<u32>],
    set_size: usize,
    budget: usize,
    rng: &mut impl Rng,
) -> (f64, SparseDepthGradient, bool) {
    // Restrict each instance to valid-depth pixels; drop instances too small
    // to yield a sample set.
    let usable: Vec<Vec<u32>> = instances
        .iter()
        .map(|px| {
            px.iter()
                .copied()
                .filter(|&p| {
                    let u = (p as usize) % depth.width;
                    let v = (p as usize) / depth.width;
                    depth.at(u, v).is_some()
                })
                .collect::<Vec<u32>>()
        })
        .filter(|px| px.len() >= set_size)
        .collect();
    if usable.is_empty() || budget == 0 {
        return (0.0, SparseDepthGradient::default(), true);
    }
    let counts: Vec<usize> = usable.iter().map(Vec::len).collect();
    let alloc = allocate_samples(&counts, budget);

    let mut sum = 0.0;
    let mut acc: Vec<(u32, f64)> = Vec::new();
    let mut n_terms = 0usize;
    for (pixels, &n_sets) in usable.iter().zip(&alloc) {
        let sets = sample_point_sets(pixels.len(), set_size, n_sets, rng)
            .expect("instances pre-filtered to hold at least set_size pixels");
        for set in sets {
            let lifted: Vec<(u32, Point3, (f64, f64, f64))> = set
                .iter()
                .map(|&idx| {
                    let p = pixels[idx as usize];
                    let (pt, pn) = lift(depth, k, p).expect("pixels pre-filtered to valid depth");
                    (p, pt, pn)
                })
                .collect();
            let (value, grads): (f64, Vec<Point3>) = if set_size == 4 {
                let (v, g) = planar_term(lifted[0].1, lifted[1].1, lifted[2].1, lifted[3].1);
                (v, g.to_vec())
            } else {
                let (v, g) = linear_term(lifted[0].1, lifted[1].1, lifted[2].1);
                (v, g.to_vec())
            };
            sum += value;
            n_terms += 1;
            for ((pixel, _, pn), g) in lifted.iter().zip(&grads) {
                // Chain rule through backprojection: dP/dZ = (x_n, y_n, 1).
                acc.push((*pixel, g.x * pn.0 + g.y * pn.1 + g.z));
            }
        }
    }
    if n_terms == 0 {
        return (0.0, SparseDepthGradient::default(), true);
    }
    let scale = 1.0 / budget as f64;
    for entry in &mut acc {
        entry.1 *= scale;
    }
    (sum * scale, SparseDepthGradient::from_accumulator(acc), false)
}

/// Mean parallelepiped volume over `n_p` sampled 4-point sets drawn from the
/// pseudo-planes, with the sparse depth gradient at the sampled pixels.
pub fn planar_consistency(
    depth: &DepthMap,
    k: &Intrinsics,
    planes: &PseudoPlaneSet,
    weights: &LossWeights,
    rng: &mut impl Rng,
) -> (f64, SparseDepthGradient, bool) {
    consistency_loss(depth, k, &planes.pixels, 4, weights.n_p, rng)
}

/// Mean parallelogram area over `n_l` sampled 3-point sets drawn from the
/// line segments' pixel lists.
pub fn linear_consistency(
    depth: &DepthMap,
    k: &Intrinsics,
    lines: &LineSegmentSet,
    weights: &LossWeights,
    rng: &mut impl Rng,
) -> (f64, SparseDepthGradient, bool) {
    let instances: Vec<Vec<u32>> = lines.segments.iter().map(|s| s.pixels.clone()).collect();
    consistency_loss(depth, k, &instances, 3, weights.n_l, rng)
}

/// Combines the term values per the integrated objective. The disparity
/// smoothness value is carried for ablation but excluded from the total when
/// coefficient smoothness is the active regularizer.
pub fn total_loss(
    l_pe: f64,
    l_ds: f64,
    l_cos: f64,
    (l_pc, pc_empty): (f64, bool),
    (l_lc, lc_empty): (f64, bool),
    weights: &LossWeights,
) -> LossBreakdown {
    LossBreakdown {
        l_pe,
        l_ds,
        l_cos,
        l_pc,
        l_lc,
        total: l_pe + weights.alpha_cos * l_cos + weights.alpha_pc * l_pc + weights.alpha_lc * l_lc,
        pc_empty,
        lc_empty,
    }
}

/// Baseline plane regularization: ordinary least squares fit z = a x + b y + c
/// and the mean squared z-residual.
pub fn lsq_fit_loss(points: &[Point3]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 points, got {}", points.len())));
    }
    // Normal equations for the design matrix [x y 1].
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atz = nalgebra::Vector3::<f64>::zeros();
    for p in points {
        let row = nalgebra::Vector3::new(p.x, p.y, 1.0);
        ata += row * row.transpose();
        atz += row * p.z;
    }
    let coeffs = ata
        .lu()
        .solve(&atz)
        .ok_or_else(|| Error::Degenerate("degenerate design matrix in least-squares fit".into()))?;
    let mse = points
        .iter()
        .map(|p| {
            let r = p.z - (coeffs[0] * p.x + coeffs[1] * p.y + coeffs[2]);
            r * r
        })
        .sum::<f64>()
        / points.len() as f64;
    Ok(mse)
}
