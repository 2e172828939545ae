use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use plgeom::camera::Intrinsics;
use plgeom::coeffs::{coeff_map_to_depth, CoeffMap};
use plgeom::eval::{
    depth_metrics, evaluate_regularity, line_report, median_scale_align, plane_report,
    select_reliable, InstanceKind,
};
use plgeom::losses::{
    coeff_smoothness, linear_consistency, planar_consistency, total_loss, LossWeights,
};
use plgeom::pfm::{read_pfm, write_pfm};
use plgeom::raster::{DepthMap, Raster};
use plgeom::regions::{
    filter_pseudo_planes, ingest_line_segments, LineSegmentSet, PseudoPlaneSet,
    MIN_PSEUDO_PLANE_PIXELS,
};
use plgeom::robustness::{run_sweep, OutlierPosition};
use plgeom::segment::{felzenszwalb_segment, Labels};
use plgeom::textio::{read_intrinsics, read_pose};
use plgeom::view::{bilinear_sample, disparity_smoothness, photometric_loss, warp_flow, PhotometricConfig};
use plgeom::Error;

#[derive(Parser)]
#[command(name = "plgeom", version, about = "Plane/line-prior depth geometry tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph-based superpixel segmentation and pseudo-plane stats.
    Segment(SegmentArgs),
    /// Evaluate the loss terms on a depth or coefficient map.
    Losses(LossesArgs),
    /// Depth metrics and flatness/straightness evaluation.
    Eval(EvalArgs),
    /// Synthetic outlier-robustness sweep.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Input image (8-bit PNG/JPEG/PNM or float PFM).
    #[arg(long)]
    image: PathBuf,
    /// Merge scale.
    #[arg(long, default_value_t = 150.0)]
    k: f64,
    /// Gaussian pre-smoothing sigma.
    #[arg(long, default_value_t = 0.8)]
    sigma: f64,
    /// Minimum component size joined in the final pass.
    #[arg(long, default_value_t = 300)]
    min_size: usize,
    /// Output label PFM; region stats and the manifest go next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LossesArgs {
    /// Depth map PFM (meters; 0 = invalid).
    #[arg(long, conflicts_with = "coeffs")]
    depth: Option<PathBuf>,
    /// Planar coefficient map PFM (3-channel).
    #[arg(long)]
    coeffs: Option<PathBuf>,
    #[arg(long)]
    intrinsics: PathBuf,
    /// Target view image.
    #[arg(long)]
    image: PathBuf,
    /// Source view image; enables the photometric term (needs --pose).
    #[arg(long)]
    source_image: Option<PathBuf>,
    /// Rigid pose target -> source (9 rotation + 3 translation entries).
    #[arg(long)]
    pose: Option<PathBuf>,
    /// Label PFM; enables planar consistency.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Line segment file; enables linear consistency.
    #[arg(long)]
    lines: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    alpha_cos: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha_pc: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha_lc: f64,
    /// 4-point set budget for planar consistency.
    #[arg(long, default_value_t = 512)]
    n_p: usize,
    /// 3-point set budget for linear consistency.
    #[arg(long, default_value_t = 128)]
    n_l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output breakdown document.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlignMode {
    Median,
    None,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted depth PFM.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth depth PFM.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    intrinsics: PathBuf,
    /// Label PFM of superpixel regions.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Line segment file.
    #[arg(long)]
    lines: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlignMode::Median)]
    align: AlignMode,
    /// Output prefix; writes <out>.depth.csv, <out>.regularity.csv, <out>.manifest.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutlierArg {
    Corner,
    Middle,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = OutlierArg::Corner)]
    outlier: OutlierArg,
    /// Monte Carlo sample count per shift; 0 for exact-only columns.
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output sweep CSV; summary and manifest go next to it.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are not usage errors.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Segment(args) => cmd_segment(args),
        Command::Losses(args) => cmd_losses(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Parse(_) => 1,
                Error::Io(_) => 2,
                Error::Dimension(_) | Error::Degenerate(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

/// Loads an image as an intensity raster in [0,1]; 8-bit formats are divided
/// by 255, PFM is taken verbatim.
fn load_image(path: &Path) -> Result<Raster, Error> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm")) {
        return read_pfm(path);
    }
    let img = image::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
    Raster::new(w, h, 3, data)
}

fn sha256_hex(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Run manifest: command, resolved parameters, seed, input digests, version.
struct Manifest {
    lines: Vec<String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Self {
            lines: vec![
                format!("command {command}"),
                format!("version {}", env!("CARGO_PKG_VERSION")),
            ],
        }
    }

    fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} {value}"));
    }

    fn input(&mut self, key: &str, path: &Path) -> Result<(), Error> {
        self.lines.push(format!("input.{key} {} sha256:{}", path.display(), sha256_hex(path)?));
        Ok(())
    }

    fn write(&self, path: &Path) -> Result<(), Error> {
        let mut f = std::fs::File::create(path)?;
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_segment(args: SegmentArgs) -> Result<(), Error> {
    let image = load_image(&args.image)?;
    let labels = felzenszwalb_segment(&image, args.k, args.sigma, args.min_size);
    write_pfm(&labels.to_raster(), &args.out)?;

    let mut counts = vec![0usize; labels.n_regions];
    for &l in &labels.labels {
        counts[l as usize] += 1;
    }
    let mut csv = String::from("region_id,n_pixels,pseudo_plane\n");
    for (id, &n) in counts.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", id, n, (n > MIN_PSEUDO_PLANE_PIXELS) as u8));
    }
    std::fs::write(with_suffix(&args.out, ".regions.csv"), csv)?;

    let mut manifest = Manifest::new("segment");
    manifest.input("image", &args.image)?;
    manifest.param("k", args.k);
    manifest.param("sigma", args.sigma);
    manifest.param("min_size", args.min_size);
    manifest.param("n_regions", labels.n_regions);
    manifest.write(&with_suffix(&args.out, ".manifest.txt"))?;
    Ok(())
}

fn load_depth(
    depth: &Option<PathBuf>,
    coeffs: &Option<PathBuf>,
    k: &Intrinsics,
) -> Result<DepthMap, Error> {
    match (depth, coeffs) {
        (Some(p), None) => DepthMap::from_raster(&read_pfm(p)?),
        (None, Some(p)) => {
            let map = CoeffMap::from_raster(&read_pfm(p)?)?;
            coeff_map_to_depth(&map, k)
        }
        _ => Err(Error::Parse("exactly one of --depth or --coeffs is required".into())),
    }
}

fn cmd_losses(args: LossesArgs) -> Result<(), Error> {
    let k = read_intrinsics(&args.intrinsics)?;
    let image = load_image(&args.image)?;
    let depth = load_depth(&args.depth, &args.coeffs, &k)?;
    if depth.width != image.width || depth.height != image.height {
        return Err(Error::Dimension(format!(
            "depth {}x{} does not match image {}x{}",
            depth.width, depth.height, image.width, image.height
        )));
    }
    let weights = LossWeights {
        alpha_cos: args.alpha_cos,
        alpha_pc: args.alpha_pc,
        alpha_lc: args.alpha_lc,
        n_p: args.n_p,
        n_l: args.n_l,
    };

    // Photometric term, only when the source view and pose are both given.
    let l_pe = match (&args.source_image, &args.pose) {
        (Some(src_path), Some(pose_path)) => {
            let source = load_image(src_path)?;
            let pose = read_pose(pose_path)?;
            let flow = warp_flow(&depth, &k, &pose);
            let (synthesized, mask) = bilinear_sample(&source, &flow)?;
            photometric_loss(&image, &synthesized, Some(&mask), &PhotometricConfig::default())?
        }
        (None, None) => 0.0,
        _ => {
            return Err(Error::Parse(
                "photometric term needs both --source-image and --pose".into(),
            ))
        }
    };

    let disparity = Raster {
        width: depth.width,
        height: depth.height,
        channels: 1,
        data: depth
            .depth
            .iter()
            .zip(&depth.valid)
            .map(|(&z, &ok)| if ok { (1.0 / z) as f32 } else { 0.0 })
            .collect(),
    };
    let l_ds = disparity_smoothness(&disparity, &image)?;

    let l_cos = match &args.coeffs {
        Some(p) => coeff_smoothness(&CoeffMap::from_raster(&read_pfm(p)?)?, &image)?,
        None => 0.0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pc = match &args.labels {
        Some(p) => {
            let labels = Labels::from_raster(&read_pfm(p)?)?;
            if labels.width != depth.width || labels.height != depth.height {
                return Err(Error::Dimension("label raster does not match depth".into()));
            }
            let planes = filter_pseudo_planes(&labels, MIN_PSEUDO_PLANE_PIXELS);
            let (l, _, empty) = planar_consistency(&depth, &k, &planes, &weights, &mut rng);
            (l, empty)
        }
        None => (0.0, true),
    };
    let lc = match &args.lines {
        Some(p) => {
            let lines = ingest_line_segments(p, depth.width, depth.height)?;
            let (l, _, empty) = linear_consistency(&depth, &k, &lines, &weights, &mut rng);
            (l, empty)
        }
        None => (0.0, true),
    };

    let bd = total_loss(l_pe, l_ds, l_cos, pc, lc, &weights);

    let mut doc = String::new();
    doc.push_str(&format!("l_pe {}\n", bd.l_pe));
    doc.push_str(&format!("l_ds {}\n", bd.l_ds));
    doc.push_str(&format!("l_cos {}\n", bd.l_cos));
    doc.push_str(&format!("l_pc {}\n", bd.l_pc));
    doc.push_str(&format!("l_lc {}\n", bd.l_lc));
    doc.push_str(&format!("total {}\n", bd.total));
    doc.push_str(&format!("pc_empty {}\n", bd.pc_empty as u8));
    doc.push_str(&format!("lc_empty {}\n", bd.lc_empty as u8));
    doc.push_str(&format!("alpha_cos {}\n", weights.alpha_cos));
    doc.push_str(&format!("alpha_pc {}\n", weights.alpha_pc));
    doc.push_str(&format!("alpha_lc {}\n", weights.alpha_lc));
    doc.push_str(&format!("n_p {}\n", weights.n_p));
    doc.push_str(&format!("n_l {}\n", weights.n_l));
    doc.push_str(&format!("seed {}\n", args.seed));
    std::fs::write(&args.out, doc)?;

    let mut manifest = Manifest::new("losses");
    if let Some(p) = &args.depth {
        manifest.input("depth", p)?;
    }
    if let Some(p) = &args.coeffs {
        manifest.input("coeffs", p)?;
    }
    manifest.input("intrinsics", &args.intrinsics)?;
    manifest.input("image", &args.image)?;
    if let Some(p) = &args.source_image {
        manifest.input("source_image", p)?;
    }
    if let Some(p) = &args.pose {
        manifest.input("pose", p)?;
    }
    if let Some(p) = &args.labels {
        manifest.input("labels", p)?;
    }
    if let Some(p) = &args.lines {
        manifest.input("lines", p)?;
    }
    manifest.param("alpha_cos", weights.alpha_cos);
    manifest.param("alpha_pc", weights.alpha_pc);
    manifest.param("alpha_lc", weights.alpha_lc);
    manifest.param("n_p", weights.n_p);
    manifest.param("n_l", weights.n_l);
    manifest.param("seed", args.seed);
    manifest.write(&with_suffix(&args.out, ".manifest.txt"))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let k = read_intrinsics(&args.intrinsics)?;
    let gt = DepthMap::from_raster(&read_pfm(&args.gt)?)?;
    let pred_raw = DepthMap::from_raster(&read_pfm(&args.pred)?)?;
    let pred = match args.align {
        AlignMode::Median => median_scale_align(&pred_raw, &gt)?,
        AlignMode::None => pred_raw,
    };
    let m = depth_metrics(&pred, &gt)?;

    let mut csv = String::from("rel,log10,rms,d1,d2,d3\n");
    csv.push_str(&format!("{},{},{},{},{},{}\n", m.rel, m.log10, m.rms, m.d1, m.d2, m.d3));
    std::fs::write(with_suffix(&args.out, ".depth.csv"), csv)?;

    let planes = match &args.labels {
        Some(p) => {
            let labels = Labels::from_raster(&read_pfm(p)?)?;
            filter_pseudo_planes(&labels, MIN_PSEUDO_PLANE_PIXELS)
        }
        None => PseudoPlaneSet {
            width: gt.width,
            height: gt.height,
            region_labels: vec![],
            pixels: vec![],
        },
    };
    let lines = match &args.lines {
        Some(p) => ingest_line_segments(p, gt.width, gt.height)?,
        None => LineSegmentSet { width: gt.width, height: gt.height, segments: vec![] },
    };

    // Reliable selection runs on the reference depth.
    let gt_points = |pixels: &[u32]| -> Vec<plgeom::camera::Point3> {
        pixels
            .iter()
            .filter_map(|&i| {
                let u = (i as usize) % gt.width;
                let v = (i as usize) / gt.width;
                gt.at(u, v).map(|z| plgeom::camera::backproject(u as f64, v as f64, z, &k).unwrap())
            })
            .collect()
    };
    let plane_gt_reports: Vec<_> = planes
        .pixels
        .iter()
        .map(|px| plane_report(&gt_points(px)).unwrap_or(plgeom::eval::RegularityReport {
            avg_dev: f64::INFINITY,
            max_dev: f64::INFINITY,
            ratio: 1.0,
        }))
        .collect();
    let line_gt_reports: Vec<_> = lines
        .segments
        .iter()
        .map(|s| line_report(&gt_points(&s.pixels)).unwrap_or(plgeom::eval::RegularityReport {
            avg_dev: f64::INFINITY,
            max_dev: f64::INFINITY,
            ratio: 1.0,
        }))
        .collect();
    let reliable_planes = select_reliable(&plane_gt_reports);
    let reliable_lines = select_reliable(&line_gt_reports);

    let summary = evaluate_regularity(&pred, &k, &planes, &lines, &reliable_planes, &reliable_lines);
    let mut csv = String::from("id,type,n_pixels,avg_dev,max_dev,ratio\n");
    for inst in &summary.instances {
        let kind = match inst.kind {
            InstanceKind::Plane => "plane",
            InstanceKind::Line => "line",
        };
        match inst.report {
            Some(r) => csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                inst.id, kind, inst.n_pixels, r.avg_dev, r.max_dev, r.ratio
            )),
            None => csv.push_str(&format!("{},{},{},,,\n", inst.id, kind, inst.n_pixels)),
        }
    }
    csv.push_str(&format!(
        "aggregate_plane,plane,{},{},{},{}\n",
        summary.n_planes, summary.plane_avg_dev, summary.plane_max_dev, summary.plane_ratio
    ));
    csv.push_str(&format!(
        "aggregate_line,line,{},{},{},{}\n",
        summary.n_lines, summary.line_avg_dev, summary.line_max_dev, summary.line_ratio
    ));
    std::fs::write(with_suffix(&args.out, ".regularity.csv"), csv)?;

    let mut manifest = Manifest::new("eval");
    manifest.input("pred", &args.pred)?;
    manifest.input("gt", &args.gt)?;
    manifest.input("intrinsics", &args.intrinsics)?;
    if let Some(p) = &args.labels {
        manifest.input("labels", p)?;
    }
    if let Some(p) = &args.lines {
        manifest.input("lines", p)?;
    }
    manifest.param(
        "align",
        match args.align {
            AlignMode::Median => "median",
            AlignMode::None => "none",
        },
    );
    manifest.param("reliable_max_dev", plgeom::eval::RELIABLE_MAX_DEV);
    manifest.param("n_skipped", summary.n_skipped);
    manifest.write(&with_suffix(&args.out, ".manifest.txt"))?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let outlier = match args.outlier {
        OutlierArg::Corner => OutlierPosition::Corner,
        OutlierArg::Middle => OutlierPosition::Middle,
    };
    let sweep = run_sweep(outlier, args.mc_samples, args.seed);

    let mut csv = String::from("d,l_pc_exact,l_pc_mc,l_pc_mc_stderr,l_ssp,delta_l_pc,delta_l_ssp\n");
    for row in &sweep.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.d,
            row.l_pc_exact,
            row.l_pc_mc,
            row.l_pc_mc_stderr,
            row.l_ssp,
            row.delta_l_pc,
            row.delta_l_ssp
        ));
    }
    std::fs::write(&args.out, csv)?;

    let mut summary = String::new();
    summary.push_str(&format!("outlier {}\n", outlier.as_str()));
    summary.push_str(&format!("mc_samples {}\n", sweep.mc_samples));
    summary.push_str(&format!("seed {}\n", sweep.seed));
    summary.push_str(&format!("max_delta_l_pc {}\n", sweep.max_delta_l_pc));
    summary.push_str(&format!("delta_l_pc_spread {}\n", sweep.delta_l_pc_spread));
    summary.push_str(&format!("delta_l_ssp_r2 {}\n", sweep.delta_l_ssp_r2));
    std::fs::write(with_suffix(&args.out, ".summary.txt"), summary)?;

    let mut manifest = Manifest::new("bench");
    manifest.param("outlier", outlier.as_str());
    manifest.param("mc_samples", args.mc_samples);
    manifest.param("seed", args.seed);
    manifest.write(&with_suffix(&args.out, ".manifest.txt"))?;
    Ok(())
}
