//! Subcommands. Each returns the process exit status or a [`CliError`]
//! (status 1).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hallway_loc::corners::{drop_border_corners, merge_nearby};
use hallway_loc::fuse::{detect_micro_landmarks, features, locate_with, FeatureKind, Status};
use hallway_loc::illum::ChromaticityPixel;
use hallway_loc::imgcore::{annotate, MarkerShape, MarkerStyle};
use hallway_loc::segment::{label_image, segment};
use hallway_loc::synth::{bundle, BundleKind, Preset};
use hallway_loc::wlan::{knn_locate, nearest_fingerprints, write_fingerprints_csv, write_scan_csv};
use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;
use crate::io::{csv_text, emit, pick, read_db, read_image, read_plan, read_scan, write_bytes, write_image};

#[derive(Debug, Parser)]
#[command(name = "hallway-loc", version, about = "Hallway localisation from one image and one WLAN scan")]
pub struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and print the result document.
    Locate(LocateArgs),
    /// Segment an image and write a label image.
    Segment(SegmentArgs),
    /// Detect boundary corners and write them as CSV.
    DetectCorners(CornerArgs),
    /// Dump every pixel in inverse-intensity chromaticity form as CSV.
    IicDump(IicArgs),
    /// Coarse WLAN estimate for one scan.
    Knn(KnnArgs),
    /// Render a synthetic bundle into a directory.
    Synth(SynthArgs),
    /// Serve POST /locate over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct LocateArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub scan: PathBuf,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub fingerprints: Option<PathBuf>,
    /// Overrides ransac.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Include per-stage timings (the document is then no longer
    /// reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Features {
    Chromaticity,
    Intensity,
}

impl From<Features> for FeatureKind {
    fn from(f: Features) -> Self {
        match f {
            Features::Chromaticity => FeatureKind::Chromaticity,
            Features::Intensity => FeatureKind::Intensity,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Label image (PPM).
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides pipeline.features.
    #[arg(long, value_enum)]
    pub features: Option<Features>,
}

#[derive(Debug, Args)]
pub struct CornerArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Corner CSV; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Copy of the image with corners marked (PPM).
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Keep only corners on the floor boundary.
    #[arg(long)]
    pub floor_only: bool,
    #[arg(long, value_enum)]
    pub features: Option<Features>,
}

#[derive(Debug, Args)]
pub struct IicArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KnnArgs {
    #[arg(long)]
    pub scan: PathBuf,
    #[arg(long)]
    pub fingerprints: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Testbed,
    A,
    B,
    C,
    D,
    E,
    Black,
    NoCorners,
}

impl From<Kind> for BundleKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Testbed => BundleKind::Testbed,
            Kind::A => BundleKind::Preset(Preset::A),
            Kind::B => BundleKind::Preset(Preset::B),
            Kind::C => BundleKind::Preset(Preset::C),
            Kind::D => BundleKind::Preset(Preset::D),
            Kind::E => BundleKind::Preset(Preset::E),
            Kind::Black => BundleKind::Black,
            Kind::NoCorners => BundleKind::NoCorners,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write into; created if missing.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "testbed")]
    pub kind: Kind,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub fingerprints: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

pub fn execute(cli: Cli) -> Result<u8, CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Locate(a) => locate(&cfg, a),
        Command::Segment(a) => segment_cmd(&cfg, a),
        Command::DetectCorners(a) => corners_cmd(&cfg, a),
        Command::IicDump(a) => iic_dump(a),
        Command::Knn(a) => knn(&cfg, a),
        Command::Synth(a) => synth(&cfg, a),
        Command::Serve(a) => crate::service::serve_blocking(&cfg, a),
    }
}

/// Exit status for a pipeline outcome.
pub fn status_code(status: Status) -> u8 {
    match status {
        Status::Ok => 0,
        Status::DegradedWlanOnly | Status::Failed => 2,
    }
}

fn locate(cfg: &Config, a: LocateArgs) -> Result<u8, CliError> {
    let plan_path = pick(a.plan.as_ref(), cfg.paths.plan.as_ref(), "plan")?;
    let db_path = pick(a.fingerprints.as_ref(), cfg.paths.fingerprints.as_ref(), "fingerprints")?;
    let pipeline = cfg.pipeline(a.seed)?;
    let img = read_image(&a.image)?;
    let scan = read_scan(&a.scan)?;
    let plan = read_plan(&plan_path)?;
    let db = read_db(&db_path)?;
    let result = locate_with(&img, &scan, &db, &plan, &pipeline, a.timings);
    tracing::info!(status = ?result.status, inliers = result.inliers, "located");
    emit(a.output.as_deref(), &result.to_json())?;
    Ok(status_code(result.status))
}

fn segment_cmd(cfg: &Config, a: SegmentArgs) -> Result<u8, CliError> {
    let img = read_image(&a.image)?;
    let kind = a.features.map_or(cfg.pipeline.features, FeatureKind::from);
    let (feats, _) = features(&img, kind, &cfg.illumination);
    let map = segment(&feats, &cfg.segmentation);
    write_image(&a.output, &label_image(&map))?;
    println!("regions: {}", map.region_count());
    Ok(0)
}

fn corners_cmd(cfg: &Config, a: CornerArgs) -> Result<u8, CliError> {
    let img = read_image(&a.image)?;
    let mut pipeline = cfg.vision();
    if let Some(f) = a.features {
        pipeline.features = f.into();
    }
    let det = detect_micro_landmarks(&img, &pipeline);
    let corners = if a.floor_only {
        det.floor_corners
    } else {
        let inside = drop_border_corners(&det.corners, img.width(), img.height(), cfg.corners.border_margin);
        merge_nearby(&inside, cfg.corners.merge_radius)
    };
    let floor_set: std::collections::BTreeSet<_> = hallway_loc::corners::filter_micro_landmarks(&corners, &det.segments)
        .corners
        .iter()
        .map(|c| (c.coord.u, c.coord.v))
        .collect();
    let rows = corners.iter().map(|c| {
        [
            c.coord.u.to_string(),
            c.coord.v.to_string(),
            format!("{:.6}", c.cornerity),
            c.contour.to_string(),
            c.index.to_string(),
            floor_set.contains(&(c.coord.u, c.coord.v)).to_string(),
        ]
    });
    emit(
        a.output.as_deref(),
        &csv_text(&["u", "v", "cornerity", "contour", "index", "floor"], rows),
    )?;
    if let Some(path) = &a.overlay {
        let style = MarkerStyle {
            shape: MarkerShape::Cross,
            radius: 4,
            color: [1.0, 0.0, 0.0],
        };
        let coords: Vec<_> = corners.iter().map(|c| c.coord).collect();
        let out = annotate(&img, &coords, &style).map_err(|e| CliError::output(path, e))?;
        write_image(path, &out)?;
    }
    Ok(0)
}

fn iic_dump(a: IicArgs) -> Result<u8, CliError> {
    let img = read_image(&a.image)?;
    let mut rows = Vec::new();
    for v in 0..img.height() {
        for u in 0..img.width() {
            let px = img.pixel(u, v);
            if let Some(c) = ChromaticityPixel::of(px) {
                let s = px[0] + px[1] + px[2];
                rows.push([
                    u.to_string(),
                    v.to_string(),
                    (1.0 / s).to_string(),
                    c.r.to_string(),
                    c.g.to_string(),
                    c.b.to_string(),
                ]);
            }
        }
    }
    emit(
        a.output.as_deref(),
        &csv_text(&["u", "v", "inv_s", "sigma_r", "sigma_g", "sigma_b"], rows),
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct NeighbourDoc {
    position: [f64; 2],
    distance: f64,
    weight: f64,
}

#[derive(Serialize)]
struct KnnDoc {
    center: [f64; 2],
    radius: f64,
    neighbours: Vec<NeighbourDoc>,
}

fn knn(cfg: &Config, a: KnnArgs) -> Result<u8, CliError> {
    let db_path = pick(a.fingerprints.as_ref(), cfg.paths.fingerprints.as_ref(), "fingerprints")?;
    let scan = read_scan(&a.scan)?;
    let db = read_db(&db_path)?;
    let est = knn_locate(&scan, &db, &cfg.wlan).map_err(|e| CliError::input(&db_path, e))?;
    let nn = nearest_fingerprints(&scan, &db, &cfg.wlan).map_err(|e| CliError::input(&db_path, e))?;
    let doc = KnnDoc {
        center: est.center,
        radius: est.radius,
        neighbours: nn
            .iter()
            .map(|n| NeighbourDoc {
                position: db.fingerprints[n.index].position,
                distance: n.distance,
                weight: n.weight,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("knn document serialises");
    text.push('\n');
    emit(a.output.as_deref(), &text)?;
    Ok(0)
}

fn synth(cfg: &Config, a: SynthArgs) -> Result<u8, CliError> {
    std::fs::create_dir_all(&a.output).map_err(|e| CliError::output(&a.output, e))?;
    let b = bundle(a.kind.into(), a.seed, &cfg.camera);
    let dir = &a.output;
    write_image(&dir.join("image.ppm"), &b.image)?;
    let truth = csv_text(
        &["u", "v", "floor", "landmark_id", "range_m", "support_px"],
        b.truth.corners.iter().map(|c| {
            [
                c.pixel[0].to_string(),
                c.pixel[1].to_string(),
                c.floor.to_string(),
                c.landmark_id.map_or(String::new(), |i| i.to_string()),
                c.range.to_string(),
                c.support_px.to_string(),
            ]
        }),
    );
    write_bytes(&dir.join("truth.csv"), truth.as_bytes())?;
    write_bytes(&dir.join("plan.json"), b.plan.to_json().as_bytes())?;
    let mut scan = Vec::new();
    write_scan_csv(&b.scan, &mut scan).map_err(|e| CliError::output(dir.join("scan.csv"), e))?;
    write_bytes(&dir.join("scan.csv"), &scan)?;
    let mut fps = Vec::new();
    write_fingerprints_csv(&b.db.fingerprints, &mut fps).map_err(|e| CliError::output(dir.join("fingerprints.csv"), e))?;
    write_bytes(&dir.join("fingerprints.csv"), &fps)?;
    let scene = serde_json::to_string_pretty(&b.spec).expect("scene serialises");
    write_bytes(&dir.join("scene.json"), scene.as_bytes())?;

    let mut bundle_cfg = cfg.clone();
    bundle_cfg.ransac = Some(cfg.pipeline(Some(a.seed))?.ransac);
    bundle_cfg.paths.plan = Some("plan.json".into());
    bundle_cfg.paths.fingerprints = Some("fingerprints.csv".into());
    write_bytes(&dir.join("config.toml"), bundle_cfg.to_toml().as_bytes())?;
    println!("pose: {:.3} {:.3} {:.4}", b.truth.pose.x, b.truth.pose.y, b.truth.pose.theta);
    Ok(0)
}
