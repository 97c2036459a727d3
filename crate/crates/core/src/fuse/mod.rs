//! Fusion of camera micro-landmarks with the WLAN coarse estimate.
//!
//! Floor corners detected in the image are projected onto the ground
//! plane, split into the left and right hallway edges, and registered
//! against plan landmarks near the WLAN estimate by RANSAC over four-point
//! correspondences (two per edge).

mod plan;
mod ransac;

pub use plan::*;
pub use ransac::*;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corners::{detect_corners, drop_border_corners, filter_micro_landmarks, merge_nearby, CornerParams, CornerPoint};
use crate::geometry::{image_to_ground, CameraModel, GroundPoint};
use crate::illum::{estimate_illuminant_from_image, intensity_features, normalize_illumination, IlluminantEstimate, IlluminantParams};
use crate::imgcore::{FeatureImage, PixelCoord, RgbImage};
use crate::segment::{extract_boundaries, label_segments, mean_shift_filter, Contour, SegmentMap, SegmentParams};
use crate::wlan::{knn_locate, FingerprintDb, RssScan, WlanParams};

/// Which per-pixel features drive segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Illumination-normalised chromaticity `(r, g)`.
    #[default]
    Chromaticity,
    /// Raw `(R, G)` values; the ablation baseline.
    Intensity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub camera: CameraModel,
    pub illumination: IlluminantParams,
    pub segmentation: SegmentParams,
    pub corners: CornerParams,
    pub wlan: WlanParams,
    pub ransac: RansacConfig,
    /// Floor points farther ahead than this (meters) are not used.
    pub max_landmark_range: f64,
    pub features: FeatureKind,
}

impl PipelineConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            camera: CameraModel::default(),
            illumination: IlluminantParams::default(),
            segmentation: SegmentParams::default(),
            corners: CornerParams::default(),
            wlan: WlanParams::default(),
            ransac: RansacConfig::new(seed),
            max_landmark_range: 12.0,
            features: FeatureKind::Chromaticity,
        }
    }
}

/// A floor corner usable for matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicroLandmark {
    pub pixel: PixelCoord,
    pub ground: GroundPoint,
    pub cornerity: f64,
}

/// Everything the vision branch produced, for diagnostics.
#[derive(Debug, Clone)]
pub struct Detection {
    pub illuminant: Option<IlluminantEstimate>,
    pub features: FeatureImage,
    pub segments: SegmentMap,
    pub contours: Vec<Contour>,
    /// Every corner above threshold.
    pub corners: Vec<CornerPoint>,
    pub floor_region: Option<u32>,
    /// Floor-boundary corners after border removal and merging.
    pub floor_corners: Vec<CornerPoint>,
    /// Floor corners that project onto the floor within range.
    pub landmarks: Vec<MicroLandmark>,
    pub timings: StageTimings,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Segmentation features for `img` under `kind`.
pub fn features(img: &RgbImage, kind: FeatureKind, params: &IlluminantParams) -> (FeatureImage, Option<IlluminantEstimate>) {
    match kind {
        FeatureKind::Chromaticity => {
            let est = estimate_illuminant_from_image(img, params);
            (normalize_illumination(img, &est, params), Some(est))
        }
        FeatureKind::Intensity => (intensity_features(img), None),
    }
}

/// The vision branch up to ground-plane micro-landmarks.
pub fn detect_micro_landmarks(img: &RgbImage, cfg: &PipelineConfig) -> Detection {
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let (feats, illuminant) = features(img, cfg.features, &cfg.illumination);
    timings.illumination = ms(t);

    let t = Instant::now();
    let filtered = mean_shift_filter(&feats, &cfg.segmentation.mean_shift());
    timings.mean_shift = ms(t);

    let t = Instant::now();
    let segments = label_segments(&filtered, cfg.segmentation.range_bandwidth, cfg.segmentation.min_region_size);
    let contours = extract_boundaries(&segments);
    timings.labelling = ms(t);

    let t = Instant::now();
    let corners = detect_corners(&contours, &cfg.corners);
    let floor = filter_micro_landmarks(&corners, &segments);
    let inside = drop_border_corners(&floor.corners, img.width(), img.height(), cfg.corners.border_margin);
    let floor_corners = merge_nearby(&inside, cfg.corners.merge_radius);
    let landmarks = floor_corners
        .iter()
        .filter_map(|c| {
            let g = image_to_ground(c.coord, &cfg.camera).ok()?;
            (g.forward <= cfg.max_landmark_range).then_some(MicroLandmark {
                pixel: c.coord,
                ground: g,
                cornerity: c.cornerity,
            })
        })
        .collect();
    timings.corners = ms(t);

    Detection {
        illuminant,
        features: feats,
        segments,
        contours,
        corners,
        floor_region: floor.floor_region,
        floor_corners,
        landmarks,
        timings,
    }
}

/// WLAN search disc, or the whole plan when the scan shares no access
/// point with the database.
pub fn coarse_estimate(scan: &RssScan, db: &FingerprintDb, plan: &FloorPlan, params: &WlanParams) -> CoarseReport {
    let known = scan.readings.keys().any(|ap| db.aps.contains(ap));
    match knn_locate(scan, db, params) {
        Ok(est) if known => CoarseReport {
            center: est.center,
            radius: est.radius,
            source: CoarseSource::Wlan,
        },
        _ => {
            let d = plan.whole_plan_disc();
            CoarseReport {
                center: d.center,
                radius: d.radius,
                source: CoarseSource::WholePlan,
            }
        }
    }
}

/// Full localisation of one frame and one scan. Deterministic: the same
/// inputs give the same result, bit for bit, unless `timings` is set.
pub fn locate_with(
    img: &RgbImage,
    scan: &RssScan,
    db: &FingerprintDb,
    plan: &FloorPlan,
    cfg: &PipelineConfig,
    timings: bool,
) -> LocalizationResult {
    let start = Instant::now();
    let (detection, (coarse, knn_ms)) = rayon::join(
        || detect_micro_landmarks(img, cfg),
        || {
            let t = Instant::now();
            (coarse_estimate(scan, db, plan, &cfg.wlan), ms(t))
        },
    );
    let points: Vec<GroundPoint> = detection.landmarks.iter().map(|l| l.ground).collect();

    let t = Instant::now();
    let mut result = ransac_locate(&points, plan, &coarse, &cfg.ransac);
    let ransac_ms = ms(t);

    if result.status != Status::Ok && coarse.source == CoarseSource::WholePlan {
        result.status = Status::Failed;
    }
    let lines = crate::geometry::fit_edge_lines(&points).ok();
    result.counts = Some(StageCounts {
        regions: detection.segments.region_count(),
        contours: detection.contours.len(),
        corners: detection.corners.len(),
        floor_corners: detection.floor_corners.len(),
        micro_landmarks: points.len(),
        left_line: lines.as_ref().and_then(|l| l.left.as_ref()).map_or(0, |f| f.members.len()),
        right_line: lines.as_ref().and_then(|l| l.right.as_ref()).map_or(0, |f| f.members.len()),
        candidates: candidate_landmarks(plan, &search_disc(&points, &coarse)).map_or(0, |c| c.landmarks.len()),
    });
    if timings {
        result.timings_ms = Some(StageTimings {
            wlan: knn_ms,
            ransac: ransac_ms,
            total: ms(start),
            ..detection.timings
        });
    }
    result
}

pub fn locate(img: &RgbImage, scan: &RssScan, db: &FingerprintDb, plan: &FloorPlan, cfg: &PipelineConfig) -> LocalizationResult {
    locate_with(img, scan, db, plan, cfg, false)
}
