//! Synthetic outlier-robustness study: a planar 10x10 grid with one displaced
//! point, sweeping the displacement and comparing the random-sample
//! consistency loss against the least-square-fit baseline, both by exact
//! enumeration over all 4-point subsets and by seeded Monte Carlo.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::camera::Point3;
use crate::losses::{lsq_fit_loss, planar_term};
use crate::parallel;
use crate::regions::sample_point_sets;
use crate::{Error, Result};

pub const GRID_SIDE: usize = 10;
pub const SWEEP_STEPS: usize = 21;
pub const SWEEP_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierPosition {
    Corner,
    Middle,
}

impl OutlierPosition {
    fn grid_index(self) -> (usize, usize) {
        match self {
            OutlierPosition::Corner => (0, 0),
            OutlierPosition::Middle => (5, 5),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutlierPosition::Corner => "corner",
            OutlierPosition::Middle => "middle",
        }
    }
}

/// 10x10 grid of points spanning a unit square in the X-Y plane, with one
/// point displaced by `(0, 0, shift)`.
#[derive(Debug, Clone)]
pub struct GridScene {
    pub points: Vec<Point3>,
    pub outlier: OutlierPosition,
    pub shift: f64,
}

pub fn make_grid(outlier: OutlierPosition, shift: f64) -> Result<GridScene> {
    if shift < 0.0 || !shift.is_finite() {
        return Err(Error::Degenerate(format!("outlier shift must be >= 0, got {shift}")));
    }
    let (oi, oj) = outlier.grid_index();
    let spacing = 1.0 / (GRID_SIDE - 1) as f64;
    let mut points = Vec::with_capacity(GRID_SIDE * GRID_SIDE);
    for i in 0..GRID_SIDE {
        for j in 0..GRID_SIDE {
            let z = if i == oi && j == oj { shift } else { 0.0 };
            points.push(Point3::new(i as f64 * spacing, j as f64 * spacing, z));
        }
    }
    Ok(GridScene { points, outlier, shift })
}

/// Exact mean of |det| over all C(n, 4) unordered 4-point subsets.
/// Partitioned by the first index; per-partition sums and the final reduction
/// are in fixed index order, so the result is thread-count independent.
pub fn enumerate_mean_volume(points: &[Point3]) -> f64 {
    let n = points.len();
    assert!(n >= 4);
    let partials = parallel::map_range(0..n - 3, |a| {
        let mut sum = 0.0;
        for b in a + 1..n - 2 {
            for c in b + 1..n - 1 {
                for d in c + 1..n {
                    let (v, _) = planar_term(points[a], points[b], points[c], points[d]);
                    sum += v;
                }
            }
        }
        sum
    });
    let total: f64 = partials.iter().sum();
    let n_sets = choose4(n);
    total / n_sets as f64
}

/// Sequential twin of `enumerate_mean_volume`, kept for the bench comparison
/// and as a cross-check that the parallel partition changes nothing.
pub fn enumerate_mean_volume_seq(points: &[Point3]) -> f64 {
    let n = points.len();
    assert!(n >= 4);
    let mut partials = Vec::with_capacity(n - 3);
    for a in 0..n - 3 {
        let mut sum = 0.0;
        for b in a + 1..n - 2 {
            for c in b + 1..n - 1 {
                for d in c + 1..n {
                    let (v, _) = planar_term(points[a], points[b], points[c], points[d]);
                    sum += v;
                }
            }
        }
        partials.push(sum);
    }
    partials.iter().sum::<f64>() / choose4(n) as f64
}

pub fn choose4(n: usize) -> u64 {
    let n = n as u64;
    n * (n - 1) * (n - 2) * (n - 3) / 24
}

pub fn l_pc_exact(scene: &GridScene) -> f64 {
    enumerate_mean_volume(&scene.points)
}

/// Sample mean and standard error of |det| over uniformly drawn distinct
/// 4-point subsets. Samples are drawn up front from the seeded generator and
/// the terms reduced in sample order, so the result does not depend on the
/// worker count.
pub fn l_pc_monte_carlo(scene: &GridScene, n_samples: usize, rng: &mut impl Rng) -> (f64, f64) {
    if n_samples == 0 {
        return (0.0, 0.0);
    }
    let n = scene.points.len();
    let sets = sample_point_sets(n, 4, n_samples, rng).expect("grid has >= 4 points");
    let terms = parallel::map_collect(&sets, |set| {
        let (v, _) = planar_term(
            scene.points[set[0] as usize],
            scene.points[set[1] as usize],
            scene.points[set[2] as usize],
            scene.points[set[3] as usize],
        );
        v
    });
    let mean: f64 = terms.iter().sum::<f64>() / n_samples as f64;
    let var: f64 =
        terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n_samples as f64;
    (mean, (var / n_samples as f64).sqrt())
}

pub fn l_ssp(scene: &GridScene) -> f64 {
    lsq_fit_loss(&scene.points).expect("grid design matrix is full rank")
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub d: f64,
    pub l_pc_exact: f64,
    /// Monte Carlo estimate and its standard error; zero-sample runs carry 0.
    pub l_pc_mc: f64,
    pub l_pc_mc_stderr: f64,
    pub l_ssp: f64,
    pub delta_l_pc: f64,
    pub delta_l_ssp: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub outlier: OutlierPosition,
    pub mc_samples: usize,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    /// max over d of Delta L_pc on the exact path.
    pub max_delta_l_pc: f64,
    /// max |Delta L_pc(d_i) - Delta L_pc(d_1)|, constancy of the exact path.
    pub delta_l_pc_spread: f64,
    /// R^2 of the linear fit of Delta L_ssp against d.
    pub delta_l_ssp_r2: f64,
}

/// 21-row sweep of the outlier shift from 0 to 2 in 0.1 steps.
pub fn run_sweep(outlier: OutlierPosition, mc_samples: usize, seed: u64) -> SweepResult {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(SWEEP_STEPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prev_pc = 0.0;
    let mut prev_ssp = 0.0;
    for i in 0..SWEEP_STEPS {
        let d = i as f64 * SWEEP_STEP;
        let scene = make_grid(outlier, d).unwrap();
        let exact = l_pc_exact(&scene);
        let (mc, se) = l_pc_monte_carlo(&scene, mc_samples, &mut rng);
        let ssp = l_ssp(&scene);
        rows.push(SweepRow {
            d,
            l_pc_exact: exact,
            l_pc_mc: mc,
            l_pc_mc_stderr: se,
            l_ssp: ssp,
            delta_l_pc: if i == 0 { 0.0 } else { exact - prev_pc },
            delta_l_ssp: if i == 0 { 0.0 } else { ssp - prev_ssp },
        });
        prev_pc = exact;
        prev_ssp = ssp;
    }

    let deltas_pc: Vec<f64> = rows.iter().skip(1).map(|r| r.delta_l_pc).collect();
    let max_delta_l_pc = deltas_pc.iter().cloned().fold(0.0, f64::max);
    let delta_l_pc_spread =
        deltas_pc.iter().map(|&d| (d - deltas_pc[0]).abs()).fold(0.0, f64::max);

    // Linear regression of Delta L_ssp on d over the 20 increment rows.
    let xs: Vec<f64> = rows.iter().skip(1).map(|r| r.d).collect();
    let ys: Vec<f64> = rows.iter().skip(1).map(|r| r.delta_l_ssp).collect();
    let delta_l_ssp_r2 = linear_fit_r2(&xs, &ys);

    SweepResult {
        outlier,
        mc_samples,
        seed,
        rows,
        max_delta_l_pc,
        delta_l_pc_spread,
        delta_l_ssp_r2,
    }
}

fn linear_fit_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return if syy == 0.0 { 1.0 } else { 0.0 };
    }
    (sxy * sxy) / (sxx * syy)
}
