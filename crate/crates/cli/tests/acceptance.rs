//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Every fixture is seeded; a run is reproducible apart from wall-clock
//! timings.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use base64::Engine;
use hallway_loc::corners::{drop_border_corners, merge_nearby, CornerPoint};
use hallway_loc::fuse::{
    count_hypotheses, detect_micro_landmarks, locate, ransac_locate, CoarseReport, CoarseSource, FeatureKind, PipelineConfig, RansacConfig,
    Status,
};
use hallway_loc::geometry::{estimate_rigid_2d, image_to_ground, rms_residual, CameraModel, GroundPoint, Pose2D};
use hallway_loc::illum::ChromaticityPixel;
use hallway_loc::imgcore::{FeatureImage, PixelCoord, RgbImage};
use hallway_loc::segment::{segment, SegmentMap, SegmentParams};
use hallway_loc::synth::{
    bundle, fingerprint_grid, ground_scene, random_pose, simulate_rss, testbed_access_points, BundleKind, GroundSceneParams, Preset,
    RfModel, SceneSpec, IMAGE_HEIGHT, IMAGE_WIDTH,
};
use hallway_loc::wlan::{knn_locate, WlanParams};
use hallway_loc_cli::config::Config;
use hallway_loc_cli::service::{router, Service};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tower::ServiceExt;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn testbed_plan() -> hallway_loc::fuse::FloorPlan {
    SceneSpec::testbed(Pose2D::new(6.858, 1.0, std::f64::consts::FRAC_PI_2), 0).floor_plan()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn px(c: &CornerPoint) -> [f64; 2] {
    [c.coord.u as f64, c.coord.v as f64]
}

// ---------------------------------------------------------------- AC1

fn wlan_accuracy() -> Outcome {
    let t = Instant::now();
    let plan = testbed_plan();
    let aps = testbed_access_points();
    let model = RfModel {
        p0: -40.0,
        exponent: 3.0,
        sigma: 3.0,
    };
    let db = fingerprint_grid(&plan, &aps, 3.0, &model, 5, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = WlanParams::default();
    let (mut errors, mut floor_ok) = (Vec::new(), 0);
    for i in 0..200u64 {
        let q = [rng.random_range(0.0..plan.width_m), rng.random_range(0.0..plan.depth_m)];
        let scan = simulate_rss(&aps, q, &model, 10_000 + i);
        let est = knn_locate(&scan, &db, &params).expect("non-empty db");
        errors.push(dist(est.center, q));
        floor_ok += (est.radius >= 10.0) as usize;
    }
    let secs = t.elapsed().as_secs_f64();
    let med = median(errors);
    outcome(
        med <= 10.0 && floor_ok == 200 && secs < 5.0,
        format!("median error {med:.2} m (<= 10), radius >= 10 m in {floor_ok}/200, {secs:.2} s (< 5)"),
    )
}

// ---------------------------------------------------------------- AC2

/// Ordered 4-tuples of distinct indices below `n`.
fn ordered_quads(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let q = [a, b, c, d];
                    if (0..4).all(|i| (i + 1..4).all(|j| q[i] != q[j])) {
                        out.push(q);
                    }
                }
            }
        }
    }
    out
}

fn hypothesis_count() -> Outcome {
    let t = Instant::now();
    let anchor = count_hypotheses(10, 32).count;
    let mut mismatches = Vec::new();
    for n in 0..=7 {
        let img = ordered_quads(n);
        for m in 0..=7 {
            let map = ordered_quads(m);
            let mut brute = 0u128;
            for _ in &img {
                for _ in &map {
                    brute += 1;
                }
            }
            if count_hypotheses(n, m).count != brute {
                mismatches.push((n, m));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        anchor == 4_349_721_600 && mismatches.is_empty() && secs < 10.0,
        format!("count(10, 32) = {anchor}, brute-force mismatches for n, m <= 7: {mismatches:?}, {secs:.2} s (< 10)"),
    )
}

// ---------------------------------------------------------------- AC3

fn vision(kind: FeatureKind) -> PipelineConfig {
    PipelineConfig {
        features: kind,
        ..PipelineConfig::new(0)
    }
}

fn chroma_scale_invariance() -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut n) = (0.0f64, 0);
    while n < 1000 {
        let p = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        let top = p.iter().cloned().fold(0.0, f64::max);
        let k = rng.random_range(0.05..=1.0 / top);
        let q = p.map(|c| c * k);
        let (Some(a), Some(b)) = (ChromaticityPixel::of(p), ChromaticityPixel::of(q)) else {
            continue;
        };
        for (x, y) in a.as_array().iter().zip(b.as_array()) {
            worst = worst.max((x - y).abs());
        }
        n += 1;
    }
    (worst, n)
}

/// Floor corners farther than 3 px from every plan-landmark corner.
fn false_corners(b: &hallway_loc::synth::Bundle, kind: FeatureKind) -> usize {
    let det = detect_micro_landmarks(&b.image, &vision(kind));
    let truth: Vec<[f64; 2]> = b
        .truth
        .corners
        .iter()
        .filter(|c| c.landmark_id.is_some())
        .map(|c| c.pixel)
        .collect();
    det.floor_corners
        .iter()
        .filter(|c| truth.iter().all(|t| dist(px(c), *t) > 3.0))
        .count()
}

fn illumination_invariance() -> Outcome {
    let (worst, n) = chroma_scale_invariance();
    let cam = CameraModel::default();
    let mut wins = 0;
    let mut per = Vec::new();
    for (i, p) in Preset::ALL.iter().enumerate() {
        let b = bundle(BundleKind::Preset(*p), 300 + i as u64, &cam);
        let chroma = false_corners(&b, FeatureKind::Chromaticity);
        let intensity = false_corners(&b, FeatureKind::Intensity);
        wins += (chroma <= intensity) as usize;
        per.push(format!("{p:?} {chroma}/{intensity}"));
    }
    outcome(
        worst <= 1e-12 && n == 1000 && wins >= 4,
        format!(
            "max chromaticity change under scaling {worst:.1e} over {n} pixels (<= 1e-12); false corners chromaticity/intensity {}; chromaticity <= intensity in {wins}/5 (>= 4)",
            per.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- AC4

/// Every corner after border removal and merging, floor or not.
fn all_corners(img: &RgbImage) -> Vec<CornerPoint> {
    let cfg = vision(FeatureKind::Chromaticity);
    let det = detect_micro_landmarks(img, &cfg);
    let inside = drop_border_corners(&det.corners, img.width(), img.height(), cfg.corners.border_margin);
    merge_nearby(&inside, cfg.corners.merge_radius)
}

fn corner_detector() -> Outcome {
    // square covering pixels 40..100; its geometric corners sit on pixel edges
    let square = RgbImage::from_fn(140, 140, |u, v| {
        if (40..100).contains(&u) && (40..100).contains(&v) {
            [0.62, 0.22, 0.16]
        } else {
            [0.20, 0.32, 0.48]
        }
    });
    let sq = all_corners(&square);
    let truth = [[39.5, 39.5], [99.5, 39.5], [39.5, 99.5], [99.5, 99.5]];
    let sq_ok = sq.len() == 4 && truth.iter().all(|t| sq.iter().any(|c| dist(px(c), *t) <= 1.0));

    let circle = RgbImage::from_fn(140, 140, |u, v| {
        if (u as f64 - 70.0).hypot(v as f64 - 70.0) <= 40.0 {
            [0.62, 0.22, 0.16]
        } else {
            [0.20, 0.32, 0.48]
        }
    });
    let circ = all_corners(&circle).len();

    // defect-free hallways: floor-boundary detections against the
    // analytic floor corners
    let cam = CameraModel::default();
    let cfg = vision(FeatureKind::Chromaticity);
    let (mut tp_truth, mut n_truth, mut tp_det, mut n_det, mut slowest) = (0, 0, 0, 0, 0.0f64);
    for seed in 0..5u64 {
        let b = bundle(BundleKind::Testbed, 400 + seed, &cam);
        let t = Instant::now();
        let det = detect_micro_landmarks(&b.image, &cfg);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let floor: Vec<_> = b.truth.corners.iter().filter(|c| c.floor).collect();
        let resolvable: Vec<[f64; 2]> = floor
            .iter()
            .filter(|c| c.resolvable(cfg.corners.k, IMAGE_WIDTH, IMAGE_HEIGHT, cfg.max_landmark_range))
            .map(|c| c.pixel)
            .collect();
        n_truth += resolvable.len();
        tp_truth += resolvable
            .iter()
            .filter(|t| det.floor_corners.iter().any(|c| dist(px(c), **t) <= 3.0))
            .count();
        n_det += det.floor_corners.len();
        tp_det += det
            .floor_corners
            .iter()
            .filter(|c| floor.iter().any(|t| dist(px(c), t.pixel) <= 3.0))
            .count();
    }
    let recall = tp_truth as f64 / n_truth.max(1) as f64;
    let precision = tp_det as f64 / n_det.max(1) as f64;
    outcome(
        sq_ok && circ == 0 && recall >= 0.9 && precision >= 0.9 && slowest < 10.0,
        format!(
            "square {} corners (4 within 1 px: {sq_ok}), circle {circ} (0), hallway recall {recall:.3} ({tp_truth}/{n_truth}) precision {precision:.3} ({tp_det}/{n_det}) at 3 px (>= 0.9), slowest {slowest:.2} s (< 10)",
            sq.len()
        ),
    )
}

// ---------------------------------------------------------------- AC5

/// Four-quadrant and disc scenes with well separated tones, plus the
/// matching label map.
fn piecewise_scene(seed: u64) -> (FeatureImage, Vec<u32>) {
    let (w, h) = (120, 90);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tones = [[0.22, 0.30], [0.40, 0.28], [0.30, 0.45], [0.48, 0.42], [0.34, 0.18]];
    let cx = rng.random_range(35..85);
    let cy = rng.random_range(25..65);
    let disc = (
        [rng.random_range(25.0..95.0), rng.random_range(20.0..70.0)],
        rng.random_range(9.0..16.0),
    );
    let label = |u: usize, v: usize| -> u32 {
        if (u as f64 - disc.0[0]).hypot(v as f64 - disc.0[1]) <= disc.1 {
            4
        } else {
            (u >= cx) as u32 + 2 * (v >= cy) as u32
        }
    };
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut truth = Vec::with_capacity(w * h);
    let f = FeatureImage::from_fn(w, h, |u, v| {
        let l = label(u, v);
        truth.push(l);
        let t = tones[l as usize];
        [t[0] + noise.sample(&mut rng), t[1] + noise.sample(&mut rng)]
    });
    (f, truth)
}

fn boundary(labels: &[u32], w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let l = labels[v * w + u];
            if (u + 1 < w && labels[v * w + u + 1] != l) || (v + 1 < h && labels[(v + 1) * w + u] != l) {
                out.push((u, v));
            }
        }
    }
    out
}

fn matched(a: &[(usize, usize)], b: &[(usize, usize)], tol: f64) -> usize {
    a.iter()
        .filter(|p| b.iter().any(|q| (p.0 as f64 - q.0 as f64).hypot(p.1 as f64 - q.1 as f64) <= tol))
        .count()
}

fn boundary_f1(map: &SegmentMap, truth: &[u32]) -> f64 {
    let got = boundary(&map.labels, map.width, map.height);
    let want = boundary(truth, map.width, map.height);
    let p = matched(&got, &want, 2.0) as f64 / got.len().max(1) as f64;
    let r = matched(&want, &got, 2.0) as f64 / want.len().max(1) as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn segmentation() -> Outcome {
    let params = SegmentParams::default();
    let mut worst_f1 = f64::INFINITY;
    for seed in 0..5 {
        let (f, truth) = piecewise_scene(500 + seed);
        worst_f1 = worst_f1.min(boundary_f1(&segment(&f, &params), &truth));
    }
    let flat = FeatureImage::from_fn(64, 48, |_, _| [0.31, 0.36]);
    let flat_regions = segment(&flat, &params).region_count();

    let (f, _) = piecewise_scene(599);
    let a = in_pool(1, || segment(&f, &params));
    let b = in_pool(1, || segment(&f, &params));
    let c = in_pool(4, || segment(&f, &params));
    let deterministic = a.labels == b.labels && a.labels == c.labels && a.regions == c.regions;
    outcome(
        worst_f1 >= 0.9 && flat_regions == 1 && deterministic,
        format!("worst boundary F1 {worst_f1:.3} over 5 scenes (>= 0.9), constant image {flat_regions} region(s) (1), identical across runs and 1/4 threads: {deterministic}"),
    )
}

// ---------------------------------------------------------------- AC6

/// Floor hit of the ray through pixel `(u, v)`, found by rotating the
/// pinhole direction into the ground frame and bisecting on depth.
fn ray_plane_oracle(u: f64, v: f64, cam: &CameraModel) -> Option<[f64; 2]> {
    let (s, c) = cam.pitch.sin_cos();
    // camera axes (right, down, optical) in (forward, left, up)
    let right = [0.0, -1.0, 0.0];
    let down = [-s, 0.0, -c];
    let optical = [c, 0.0, -s];
    let (x, y) = ((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy);
    let d: Vec<f64> = (0..3).map(|i| x * right[i] + y * down[i] + optical[i]).collect();
    if d[2] >= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while cam.height + hi * d[2] > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cam.height + mid * d[2] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Some([t * d[0], t * d[1]])
}

/// Best pose over a 0.1 degree heading grid, each heading with its
/// optimal translation, then refined on a 1 cm translation grid.
fn grid_search(pairs: &[(GroundPoint, [f64; 2])]) -> Pose2D {
    let n = pairs.len() as f64;
    let best_for = |theta: f64| {
        let (s, c) = theta.sin_cos();
        let (mut tx, mut ty) = (0.0, 0.0);
        for (g, m) in pairs {
            tx += m[0] - (c * g.forward - s * g.left);
            ty += m[1] - (s * g.forward + c * g.left);
        }
        Pose2D::new(tx / n, ty / n, theta)
    };
    let mut best = (f64::INFINITY, Pose2D::default());
    for i in 0..3600 {
        let p = best_for((i as f64 * 0.1).to_radians());
        let r = rms_residual(&p, pairs);
        if r < best.0 {
            best = (r, p);
        }
    }
    let centre = best.1;
    for dx in -5..=5 {
        for dy in -5..=5 {
            let p = Pose2D::new(centre.x + dx as f64 * 0.01, centre.y + dy as f64 * 0.01, centre.theta);
            let r = rms_residual(&p, pairs);
            if r < best.0 {
                best = (r, p);
            }
        }
    }
    best.1
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_proj, mut n_proj) = (0.0f64, 0);
    while n_proj < 1000 {
        let cam = CameraModel {
            fx: rng.random_range(300.0..900.0),
            fy: rng.random_range(300.0..900.0),
            cx: rng.random_range(280.0..360.0),
            cy: rng.random_range(200.0..280.0),
            height: rng.random_range(0.8..2.0),
            pitch: rng.random_range(0.0..0.8),
        };
        let (u, v) = (rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        let p = PixelCoord::new(u as usize, v as usize);
        let (Ok(g), Some(o)) = (image_to_ground(p, &cam), ray_plane_oracle(p.u as f64, p.v as f64, &cam)) else {
            continue;
        };
        worst_proj = worst_proj.max(dist(g.as_array(), o));
        n_proj += 1;
    }

    let noise = Normal::new(0.0, 0.05).unwrap();
    let (mut worst_t, mut worst_r) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let truth = Pose2D::new(
            rng.random_range(0.0..14.0),
            rng.random_range(0.0..32.0),
            rng.random_range(-3.1..3.1),
        );
        let pairs: Vec<(GroundPoint, [f64; 2])> = (0..4)
            .map(|_| {
                let g = GroundPoint::new(rng.random_range(2.0..12.0), rng.random_range(-2.0..2.0));
                let m = truth.transform(g);
                (g, [m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)])
            })
            .collect();
        let fit = estimate_rigid_2d(&pairs).expect("four distinct pairs").pose;
        let grid = grid_search(&pairs);
        worst_t = worst_t.max(fit.position_error(&grid));
        worst_r = worst_r.max(fit.heading_error(&grid).to_degrees());
    }
    outcome(
        worst_proj <= 1e-6 && worst_t <= 0.01 && worst_r <= 0.1,
        format!(
            "image_to_ground vs ray-plane bisection worst {worst_proj:.1e} m over {n_proj} pixels (<= 1e-6); rigid fit vs grid search worst {worst_t:.4} m (<= 0.01), {worst_r:.3} deg (<= 0.1) over 50 problems"
        ),
    )
}

// ---------------------------------------------------------------- AC7

fn ransac_recovery() -> Outcome {
    let plan = testbed_plan();
    let aps = testbed_access_points();
    let model = RfModel::default();
    let db = fingerprint_grid(&plan, &aps, 3.0, &model, 5, 0x5eed);
    let (mut ok, mut refined, mut slowest, mut fraction) = (0, 0, 0.0f64, 1.0f64);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_pose(&mut rng);
        // false corners make up at least 30% of each scene
        let t = ground_scene(
            &plan,
            &pose,
            &GroundSceneParams {
                n_false: 0,
                ..Default::default()
            },
            seed,
        )
        .true_count();
        let params = GroundSceneParams {
            n_false: (3 * t).div_ceil(7),
            ..Default::default()
        };
        let scene = ground_scene(&plan, &pose, &params, seed);
        fraction = fraction.min(1.0 - scene.true_count() as f64 / scene.points.len() as f64);
        let scan = simulate_rss(&aps, [pose.x, pose.y], &model, seed + 1000);
        let est = knn_locate(&scan, &db, &WlanParams::default()).expect("non-empty db");
        let coarse = CoarseReport {
            center: est.center,
            radius: est.radius,
            source: CoarseSource::Wlan,
        };
        let cfg = RansacConfig {
            max_iterations: 2000,
            ..RansacConfig::new(seed)
        };
        let t = Instant::now();
        let r = ransac_locate(&scene.points, &plan, &coarse, &cfg);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        ok += (r.status == Status::Ok && r.pose.position_error(&pose) <= 0.2 && r.pose.heading_error(&pose) <= 2f64.to_radians()) as usize;
        refined += match (r.rms, r.raw_rms) {
            (Some(a), Some(b)) => (a <= b) as usize,
            _ => 1,
        };
    }
    outcome(
        ok >= 95 && refined == 100 && slowest < 2.0,
        format!("{ok}/100 within 0.2 m and 2 deg (>= 95), refined <= raw in {refined}/100, outlier share >= {:.0}%, slowest {slowest:.3} s (< 2)", fraction * 100.0),
    )
}

// ---------------------------------------------------------------- AC8

fn synth_files(dir: &Path, kind: &str, seed: u64) -> std::path::PathBuf {
    let out = dir.join(format!("{kind}-{seed}"));
    let o = Command::new(env!("CARGO_BIN_EXE_hallway-loc"))
        .args([
            "synth",
            "--output",
            out.to_str().unwrap(),
            "--kind",
            kind,
            "--seed",
            &seed.to_string(),
        ])
        .output()
        .expect("binary runs");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn cli_document(b: &Path) -> Vec<u8> {
    let arg = |f: &str| b.join(f).to_str().unwrap().to_string();
    Command::new(env!("CARGO_BIN_EXE_hallway-loc"))
        .args([
            "locate",
            "--config",
            &arg("config.toml"),
            "--image",
            &arg("image.ppm"),
            "--scan",
            &arg("scan.csv"),
        ])
        .output()
        .expect("binary runs")
        .stdout
}

fn service_document(rt: &tokio::runtime::Runtime, b: &Path) -> (StatusCode, Vec<u8>) {
    let config = Config::load(&b.join("config.toml")).unwrap();
    let plan = hallway_loc_cli::io::read_plan(&b.join("plan.json")).unwrap();
    let db = hallway_loc_cli::io::read_db(&b.join("fingerprints.csv")).unwrap();
    let scan = hallway_loc_cli::io::read_scan(&b.join("scan.csv")).unwrap();
    let body = serde_json::json!({
        "image_ppm_b64": base64::engine::general_purpose::STANDARD.encode(std::fs::read(b.join("image.ppm")).unwrap()),
        "scan": scan.readings.iter().map(|(ap, rss)| serde_json::json!({"ap": ap, "rss": rss})).collect::<Vec<_>>(),
    });
    let app = router(Arc::new(Service { config, plan, db }));
    rt.block_on(async move {
        let req = Request::post("/locate")
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let resp = app.oneshot(req).await.unwrap();
        let status = resp.status();
        (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
    })
}

fn end_to_end() -> Outcome {
    let cam = CameraModel::default();
    let mut ok = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let b = bundle(BundleKind::Testbed, 800 + seed, &cam);
        let r = locate(&b.image, &b.scan, &b.db, &b.plan, &PipelineConfig::new(seed));
        let err = r.pose.position_error(&b.truth.pose);
        if r.status == Status::Ok && err <= 0.5 {
            ok += 1;
        } else {
            misses.push(format!("{}:{:?}/{err:.2}m", 800 + seed, r.status));
        }
    }
    let degraded: Vec<Status> = [BundleKind::Black, BundleKind::NoCorners]
        .iter()
        .map(|k| {
            let b = bundle(*k, 900, &cam);
            locate(&b.image, &b.scan, &b.db, &b.plan, &PipelineConfig::new(900)).status
        })
        .collect();
    let degraded_ok = degraded.iter().all(|s| *s == Status::DegradedWlanOnly);

    let dir = tempfile::tempdir().unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let mut identical = 0;
    let cases = [("testbed", 0), ("testbed", 1), ("black", 0), ("no-corners", 0)];
    for (kind, seed) in cases {
        let b = synth_files(dir.path(), kind, seed);
        let (status, body) = service_document(&rt, &b);
        identical += (status == StatusCode::OK && body == cli_document(&b)) as usize;
    }
    outcome(
        ok >= 18 && degraded_ok && identical == cases.len(),
        format!(
            "{ok}/20 ok within 0.5 m (>= 18){}; black and no-corner bundles {degraded:?} (degraded_wlan_only); service = CLI bytes on {identical}/{} bundles",
            if misses.is_empty() { String::new() } else { format!(" misses {}", misses.join(" ")) },
            cases.len()
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1", "WLAN accuracy", wlan_accuracy),
        ("AC2", "hypothesis count", hypothesis_count),
        ("AC3", "illumination invariance", illumination_invariance),
        ("AC4", "corner detector", corner_detector),
        ("AC5", "segmentation", segmentation),
        ("AC6", "geometry", geometry),
        ("AC7", "RANSAC pose recovery", ransac_recovery),
        ("AC8", "end to end", end_to_end),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        failed += !o.pass as usize;
        println!(
            "[{}] {id} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
