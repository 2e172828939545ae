//! Pseudo-plane and line-segment instance extraction: region filtering,
//! segment ingestion and pixel assignment, proportional sample allocation,
//! and seeded point-set sampling.

use std::path::Path;

use rand::Rng;

use crate::segment::Labels;
use crate::{Error, Result};

/// Retention threshold for pseudo-planes: strictly more pixels than this.
pub const MIN_PSEUDO_PLANE_PIXELS: usize = 1000;

/// Retained superpixel regions assumed approximately planar.
#[derive(Debug, Clone)]
pub struct PseudoPlaneSet {
    pub width: usize,
    pub height: usize,
    /// Original label id of each retained region.
    pub region_labels: Vec<u32>,
    /// Per-region linear pixel indices (v * width + u), ascending.
    pub pixels: Vec<Vec<u32>>,
}

impl PseudoPlaneSet {
    pub fn counts(&self) -> Vec<usize> {
        self.pixels.iter().map(Vec::len).collect()
    }
}

/// Regions with strictly more than `min_pixels` pixels, in ascending label
/// order. Dropped regions' pixels are left unassigned.
pub fn filter_pseudo_planes(labels: &Labels, min_pixels: usize) -> PseudoPlaneSet {
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); labels.n_regions];
    for (i, &l) in labels.labels.iter().enumerate() {
        buckets[l as usize].push(i as u32);
    }
    let mut region_labels = Vec::new();
    let mut pixels = Vec::new();
    for (label, bucket) in buckets.into_iter().enumerate() {
        if bucket.len() > min_pixels {
            region_labels.push(label as u32);
            pixels.push(bucket);
        }
    }
    PseudoPlaneSet { width: labels.width, height: labels.height, region_labels, pixels }
}

/// 2D line segment with the pixels assigned to it.
#[derive(Debug, Clone)]
pub struct LineSegment2D {
    pub p0: (f64, f64),
    pub p1: (f64, f64),
    /// Linear pixel indices (v * width + u), ascending.
    pub pixels: Vec<u32>,
}

impl LineSegment2D {
    pub fn length(&self) -> f64 {
        ((self.p1.0 - self.p0.0).powi(2) + (self.p1.1 - self.p0.1).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LineSegmentSet {
    pub width: usize,
    pub height: usize,
    pub segments: Vec<LineSegment2D>,
}

impl LineSegmentSet {
    pub fn counts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.pixels.len()).collect()
    }
}

/// Distance from a point to the closed segment (projection clamped to the
/// endpoints).
fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len2 == 0.0 { 0.0 } else { ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0) };
    let q = (a.0 + t * ab.0, a.1 + t * ab.1);
    ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
}

/// Integer pixels whose distance to the closed segment is strictly below one
/// pixel unit.
pub fn assign_pixels(p0: (f64, f64), p1: (f64, f64), width: usize, height: usize) -> Vec<u32> {
    let umin = (p0.0.min(p1.0) - 1.0).ceil().max(0.0) as usize;
    let umax = (p0.0.max(p1.0) + 1.0).floor().min((width - 1) as f64) as usize;
    let vmin = (p0.1.min(p1.1) - 1.0).ceil().max(0.0) as usize;
    let vmax = (p0.1.max(p1.1) + 1.0).floor().min((height - 1) as f64) as usize;
    let mut out = Vec::new();
    for v in vmin..=vmax {
        for u in umin..=umax {
            if point_segment_distance((u as f64, v as f64), p0, p1) < 1.0 {
                out.push((v * width + u) as u32);
            }
        }
    }
    out
}

/// Parses a segment file (one `u0 v0 u1 v1` per line), drops segments shorter
/// than a tenth of the image diagonal, and assigns pixels to the survivors.
pub fn parse_line_segments(text: &str, width: usize, height: usize) -> Result<LineSegmentSet> {
    let diag = ((width * width + height * height) as f64).sqrt();
    let min_len = diag / 10.0;
    let mut segments = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: bad number {t:?}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields u0 v0 u1 v1, got {}",
                lineno + 1,
                nums.len()
            )));
        }
        let p0 = (nums[0], nums[1]);
        let p1 = (nums[2], nums[3]);
        for &(u, v) in &[p0, p1] {
            if u < 0.0 || u > (width - 1) as f64 || v < 0.0 || v > (height - 1) as f64 {
                return Err(Error::Parse(format!(
                    "line {}: endpoint ({u}, {v}) outside {width}x{height} image",
                    lineno + 1
                )));
            }
        }
        let seg = LineSegment2D { p0, p1, pixels: Vec::new() };
        if seg.length() < min_len {
            continue;
        }
        let pixels = assign_pixels(p0, p1, width, height);
        segments.push(LineSegment2D { p0, p1, pixels });
    }
    Ok(LineSegmentSet { width, height, segments })
}

pub fn ingest_line_segments(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
) -> Result<LineSegmentSet> {
    parse_line_segments(&std::fs::read_to_string(path)?, width, height)
}

/// Largest-remainder apportionment of `budget` proportional to `counts`.
/// Remainder ties go to the lower instance index. Sums exactly to `budget`.
pub fn allocate_samples(counts: &[usize], budget: usize) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return vec![0; counts.len()];
    }
    let mut alloc: Vec<usize> = Vec::with_capacity(counts.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(counts.len());
    let mut assigned = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        let quota = budget as f64 * c as f64 / total as f64;
        let floor = quota.floor() as usize;
        alloc.push(floor);
        assigned += floor;
        remainders.push((i, quota - floor as f64));
    }
    // Descending remainder, ascending index on ties.
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(budget - assigned) {
        alloc[i] += 1;
    }
    alloc
}

/// Draws `n_sets` tuples of `set_size` distinct indices into `pixels` using
/// Floyd's algorithm over the given seeded generator. Deterministic per
/// (seed, call order).
pub fn sample_point_sets<R: Rng>(
    n_pixels: usize,
    set_size: usize,
    n_sets: usize,
    rng: &mut R,
) -> Result<Vec<Vec<u32>>> {
    if n_pixels < set_size {
        return Err(Error::Degenerate(format!(
            "instance has {n_pixels} pixels, need at least {set_size}"
        )));
    }
    let mut out = Vec::with_capacity(n_sets);
    for _ in 0..n_sets {
        let mut chosen: Vec<u32> = Vec::with_capacity(set_size);
        for j in (n_pixels - set_size)..n_pixels {
            let t = rng.gen_range(0..=j as u32);
            if chosen.contains(&t) {
                chosen.push(j as u32);
            } else {
                chosen.push(t);
            }
        }
        out.push(chosen);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels_of(counts: &[usize]) -> Labels {
        let n: usize = counts.iter().sum();
        let mut labels = Vec::with_capacity(n);
        for (i, &c) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat(i as u32).take(c));
        }
        Labels { width: n, height: 1, labels, n_regions: counts.len() }
    }

    #[test]
    fn filter_keeps_large_regions_only() {
        let set = filter_pseudo_planes(&labels_of(&[5000, 400]), MIN_PSEUDO_PLANE_PIXELS);
        assert_eq!(set.region_labels, vec![0]);
        assert_eq!(set.pixels[0].len(), 5000);
    }

    #[test]
    fn filter_all_small_gives_empty() {
        let set = filter_pseudo_planes(&labels_of(&[900, 1000]), MIN_PSEUDO_PLANE_PIXELS);
        assert!(set.region_labels.is_empty());
    }

    #[test]
    fn filter_threshold_is_strict() {
        let set = filter_pseudo_planes(&labels_of(&[1000, 1001]), MIN_PSEUDO_PLANE_PIXELS);
        assert_eq!(set.region_labels, vec![1]);
    }

    #[test]
    fn horizontal_segment_pixels() {
        let px = assign_pixels((10.0, 10.0), (20.0, 10.0), 64, 64);
        let expected: Vec<u32> = (10..=20).map(|u| 10 * 64 + u).collect();
        assert_eq!(px, expected);
    }

    #[test]
    fn diagonal_segment_pixels_match_brute_force() {
        let (w, h) = (16, 16);
        let (p0, p1) = ((0.0, 0.0), (10.0, 10.0));
        let px = assign_pixels(p0, p1, w, h);
        let mut brute = Vec::new();
        for v in 0..h {
            for u in 0..w {
                if point_segment_distance((u as f64, v as f64), p0, p1) < 1.0 {
                    brute.push((v * w + u) as u32);
                }
            }
        }
        assert_eq!(px, brute);
        // Diagonal pixels are at distance 0, immediate off-diagonals at 1/sqrt(2).
        assert!(px.contains(&(5 * 16 + 5)));
        assert!(px.contains(&(5 * 16 + 6)));
        assert!(!px.contains(&(5 * 16 + 7)));
    }

    #[test]
    fn segment_length_filter() {
        // 640x480 image: diagonal 800, threshold 80.
        let text = "0 0 79 0\n0 10 81 10\n";
        let set = parse_line_segments(text, 640, 480).unwrap();
        assert_eq!(set.segments.len(), 1);
        assert_eq!(set.segments[0].p1, (81.0, 10.0));
    }

    #[test]
    fn empty_segment_file() {
        let set = parse_line_segments("", 640, 480).unwrap();
        assert!(set.segments.is_empty());
    }

    #[test]
    fn malformed_segment_line() {
        assert!(parse_line_segments("1 2 3\n", 640, 480).is_err());
    }

    #[test]
    fn out_of_bounds_endpoint() {
        assert!(parse_line_segments("0 0 700 0\n", 640, 480).is_err());
    }

    #[test]
    fn allocation_proportional() {
        assert_eq!(allocate_samples(&[3000, 1000], 4), vec![3, 1]);
    }

    #[test]
    fn allocation_tie_by_index() {
        assert_eq!(allocate_samples(&[1, 1, 1], 4), vec![2, 1, 1]);
    }

    #[test]
    fn allocation_single_instance() {
        assert_eq!(allocate_samples(&[5000], 512), vec![512]);
    }

    #[test]
    fn allocation_sums_to_budget() {
        for budget in [0usize, 1, 7, 512] {
            let counts = [1234usize, 7, 999, 42, 10_000];
            let alloc = allocate_samples(&counts, budget);
            assert_eq!(alloc.iter().sum::<usize>(), budget);
        }
    }

    #[test]
    fn allocation_empty_counts() {
        assert!(allocate_samples(&[], 512).is_empty());
    }

    #[test]
    fn sampling_distinct_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sets = sample_point_sets(10, 4, 100, &mut rng).unwrap();
        assert_eq!(sets.len(), 100);
        for set in &sets {
            let mut s = set.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 4);
            assert!(s.iter().all(|&i| i < 10));
        }
    }

    #[test]
    fn sampling_exhaustive_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sets = sample_point_sets(4, 4, 3, &mut rng).unwrap();
        for set in sets {
            let mut s = set;
            s.sort_unstable();
            assert_eq!(s, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn sampling_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(
            sample_point_sets(100, 3, 50, &mut a).unwrap(),
            sample_point_sets(100, 3, 50, &mut b).unwrap()
        );
    }

    #[test]
    fn sampling_zero_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_point_sets(10, 3, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn sampling_too_small_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_point_sets(2, 3, 1, &mut rng).is_err());
    }
}
