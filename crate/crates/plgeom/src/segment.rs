//! Graph-based image segmentation (Felzenszwalb-Huttenlocher style merging).
//!
//! Gaussian pre-smooth, 8-connected edges weighted by color distance, merges
//! in ascending weight order under the Int(C) + k/|C| criterion, then a final
//! pass joining components below `min_size`.

use crate::raster::Raster;

/// Compact per-pixel region labels, 0..n_regions, assigned in scan order of
/// first occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub n_regions: usize,
}

impl Labels {
    /// Label raster as 1-channel float PFM payload (ids are exact in f32 for
    /// any realistic region count).
    pub fn to_raster(&self) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.labels.iter().map(|&l| l as f32).collect(),
        }
    }

    pub fn from_raster(r: &Raster) -> crate::Result<Self> {
        if r.channels != 1 {
            return Err(crate::Error::Dimension("label raster must be 1-channel".into()));
        }
        let labels: Vec<u32> = r.data.iter().map(|&v| v as u32).collect();
        let n_regions = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        Ok(Self { width: r.width, height: r.height, labels, n_regions })
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    size: Vec<usize>,
    /// Max internal edge weight of each component's MST so far.
    int_diff: Vec<f32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            int_diff: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize, w: f32) -> usize {
        let (mut a, mut b) = (a, b);
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.int_diff[a] = w;
        a
    }
}

fn gaussian_smooth(image: &Raster, sigma: f64) -> Raster {
    if sigma <= 0.0 {
        return image.clone();
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    let (w, h, ch) = (image.width, image.height, image.channels);
    // Horizontal then vertical pass, edge replication.
    let mut tmp = vec![0.0f32; w * h * ch];
    for v in 0..h {
        for u in 0..w as isize {
            for c in 0..ch {
                let mut s = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let uu = (u + ki as isize - radius).clamp(0, w as isize - 1) as usize;
                    s += kv * image.get(uu, v, c) as f64;
                }
                tmp[(v * w + u as usize) * ch + c] = s as f32;
            }
        }
    }
    let mut out = vec![0.0f32; w * h * ch];
    for v in 0..h as isize {
        for u in 0..w {
            for c in 0..ch {
                let mut s = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let vv = (v + ki as isize - radius).clamp(0, h as isize - 1) as usize;
                    s += kv * tmp[(vv * w + u) * ch + c] as f64;
                }
                out[(v as usize * w + u) * ch + c] = s as f32;
            }
        }
    }
    Raster { width: w, height: h, channels: ch, data: out }
}

fn color_distance(image: &Raster, a: usize, b: usize) -> f32 {
    let ch = image.channels;
    let mut s = 0.0f32;
    for c in 0..ch {
        let d = image.data[a * ch + c] - image.data[b * ch + c];
        s += d * d;
    }
    s.sqrt()
}

pub fn felzenszwalb_segment(image: &Raster, k: f64, sigma: f64, min_size: usize) -> Labels {
    let (w, h) = (image.width, image.height);
    let n = w * h;
    let smoothed = gaussian_smooth(image, sigma);

    // 8-connected edges, each undirected pair once.
    let mut edges: Vec<(f32, u32, u32)> = Vec::with_capacity(4 * n);
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if u + 1 < w {
                edges.push((color_distance(&smoothed, i, i + 1), i as u32, (i + 1) as u32));
            }
            if v + 1 < h {
                edges.push((color_distance(&smoothed, i, i + w), i as u32, (i + w) as u32));
                if u + 1 < w {
                    edges.push((
                        color_distance(&smoothed, i, i + w + 1),
                        i as u32,
                        (i + w + 1) as u32,
                    ));
                }
                if u > 0 {
                    edges.push((
                        color_distance(&smoothed, i, i + w - 1),
                        i as u32,
                        (i + w - 1) as u32,
                    ));
                }
            }
        }
    }
    // Stable sort keeps construction order on ties for determinism.
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut ds = DisjointSet::new(n);
    for &(wgt, a, b) in &edges {
        let ra = ds.find(a as usize);
        let rb = ds.find(b as usize);
        if ra == rb {
            continue;
        }
        let ta = ds.int_diff[ra] + (k / ds.size[ra] as f64) as f32;
        let tb = ds.int_diff[rb] + (k / ds.size[rb] as f64) as f32;
        if wgt <= ta.min(tb) {
            ds.union(ra, rb, wgt);
        }
    }

    // Join undersized components.
    if min_size > 1 {
        for &(wgt, a, b) in &edges {
            let ra = ds.find(a as usize);
            let rb = ds.find(b as usize);
            if ra != rb && (ds.size[ra] < min_size || ds.size[rb] < min_size) {
                ds.union(ra, rb, wgt);
            }
        }
    }

    // Compact labels in scan order of first occurrence.
    let mut label_of_root = vec![u32::MAX; n];
    let mut labels = vec![0u32; n];
    let mut next = 0u32;
    for i in 0..n {
        let r = ds.find(i);
        if label_of_root[r] == u32::MAX {
            label_of_root[r] = next;
            next += 1;
        }
        labels[i] = label_of_root[r];
    }
    Labels { width: w, height: h, labels, n_regions: next as usize }
}
