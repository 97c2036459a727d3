use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::{candidate_landmarks, Candidates, FloorPlan, MapLandmark, Side};
use crate::geometry::{estimate_rigid_2d, fit_edge_lines, rms_residual, GeometryError, GroundPoint, Pose2D};
use crate::wlan::CoarseEstimate;

/// Size of the ordered four-point correspondence space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HypothesisCount {
    pub count: u128,
    /// Set when either side has fewer than 4 points; `count` is then 0.
    pub underflow: bool,
}

fn falling_factorial_4(n: u128) -> u128 {
    n.saturating_mul(n - 1).saturating_mul(n - 2).saturating_mul(n - 3)
}

/// `P(n_image, 4) * P(n_map, 4)`: ordered 4-tuples on both sides. For 10
/// image points against 32 map points this is 4,349,721,600. Saturates at
/// `u128::MAX`.
pub fn count_hypotheses(n_image: usize, n_map: usize) -> HypothesisCount {
    if n_image < 4 || n_map < 4 {
        return HypothesisCount { count: 0, underflow: true };
    }
    HypothesisCount {
        count: falling_factorial_4(n_image as u128).saturating_mul(falling_factorial_4(n_map as u128)),
        underflow: false,
    }
}

fn default_max_iterations() -> usize {
    2000
}
fn default_inlier_threshold() -> f64 {
    0.5
}
fn default_min_pair_separation() -> f64 {
    0.5
}
fn default_min_inliers() -> usize {
    6
}
fn default_max_attempts() -> usize {
    64
}

/// RANSAC settings. There is deliberately no `Default`: the seed must be
/// chosen by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacConfig {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// meters
    #[serde(default = "default_inlier_threshold")]
    pub inlier_threshold: f64,
    /// meters
    #[serde(default = "default_min_pair_separation")]
    pub min_pair_separation: f64,
    #[serde(default = "default_min_inliers")]
    pub min_inliers: usize,
    /// Rejection-sampling attempts per image pair.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("ransac.{0} must be positive")]
    NotPositive(&'static str),
    #[error("inlier threshold {threshold} m must be smaller than the search radius {radius} m")]
    ThresholdTooLarge { threshold: f64, radius: f64 },
}

impl RansacConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            max_iterations: default_max_iterations(),
            inlier_threshold: default_inlier_threshold(),
            min_pair_separation: default_min_pair_separation(),
            min_inliers: default_min_inliers(),
            max_attempts: default_max_attempts(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let checks = [
            (self.max_iterations > 0, "max_iterations"),
            (self.inlier_threshold > 0.0, "inlier_threshold"),
            (self.min_pair_separation > 0.0, "min_pair_separation"),
            (self.min_inliers > 0, "min_inliers"),
            (self.max_attempts > 0, "max_attempts"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, name)) => Err(ConfigError::NotPositive(name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HypothesisError {
    /// No image pair passed the separation test within the attempt budget.
    #[error("no admissible image pair after bounded rejection sampling")]
    Exhausted,
    /// The drawn image pairs have no order- and distance-consistent
    /// counterpart among the candidate landmarks.
    #[error("no consistent map landmarks for the drawn image pairs")]
    NoMapMatch,
}

/// Draws one index with probability proportional to `separations[i]`,
/// never returning one below `min_sep`. Each attempt picks an index
/// uniformly and accepts it with probability `sep / max_sep`.
pub fn sample_pair_index<R: Rng + ?Sized>(rng: &mut R, separations: &[f64], min_sep: f64, attempts: usize) -> Option<usize> {
    let max = separations.iter().copied().fold(0.0, f64::max);
    if separations.is_empty() || max < min_sep {
        return None;
    }
    for _ in 0..attempts {
        let i = rng.random_range(0..separations.len());
        let s = separations[i];
        if s < min_sep {
            continue;
        }
        if rng.random::<f64>() * max < s {
            return Some(i);
        }
    }
    None
}

/// Two points of one image line, separation-weighted; returned in the
/// order they appear in `line` (nearest to the camera first).
pub fn sample_line_pair<R: Rng + ?Sized>(
    rng: &mut R,
    points: &[GroundPoint],
    line: &[usize],
    cfg: &RansacConfig,
) -> Option<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut seps = Vec::new();
    for a in 0..line.len() {
        for b in a + 1..line.len() {
            pairs.push((line[a], line[b]));
            seps.push(points[line[a]].distance(points[line[b]]));
        }
    }
    sample_pair_index(rng, &seps, cfg.min_pair_separation, cfg.max_attempts).map(|i| pairs[i])
}

/// Direction of travel along the hallway polylines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Travel {
    /// Camera faces increasing arc length; image left is hallway left.
    Forward,
    /// Camera faces decreasing arc length; image left is hallway right.
    Backward,
}

impl Travel {
    pub fn map_side(self, image_side: Side) -> Side {
        match self {
            Travel::Forward => image_side,
            Travel::Backward => image_side.opposite(),
        }
    }

    fn ordered(self, near: &MapLandmark, far: &MapLandmark) -> bool {
        match self {
            Travel::Forward => near.arc < far.arc,
            Travel::Backward => near.arc > far.arc,
        }
    }
}

/// Four image-to-map pairs: `image[0..2]` on the left line and
/// `image[2..4]` on the right line, each pair nearest-first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrespondenceHypothesis {
    pub image: [usize; 4],
    pub map: [MapLandmark; 4],
    pub hallway: usize,
    pub travel: Travel,
}

impl CorrespondenceHypothesis {
    pub fn pairs(&self, points: &[GroundPoint]) -> Vec<(GroundPoint, [f64; 2])> {
        (0..4).map(|i| (points[self.image[i]], self.map[i].position)).collect()
    }
}

/// Image points of the fitted edge lines, each nearest-first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageLines {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws a separation-weighted image pair from each line, a hallway and
/// travel direction, then a uniformly chosen pair of map landmarks per
/// side whose along-hallway order matches the image order and whose six
/// pairwise distances agree with the image pairs within twice the inlier
/// threshold.
pub fn generate_hypothesis<R: Rng + ?Sized>(
    rng: &mut R,
    points: &[GroundPoint],
    lines: &ImageLines,
    candidates: &Candidates,
    cfg: &RansacConfig,
) -> Result<CorrespondenceHypothesis, HypothesisError> {
    let (l0, l1) = sample_line_pair(rng, points, &lines.left, cfg).ok_or(HypothesisError::Exhausted)?;
    let (r0, r1) = sample_line_pair(rng, points, &lines.right, cfg).ok_or(HypothesisError::Exhausted)?;
    let image = [l0, l1, r0, r1];

    let mut halls: Vec<usize> = candidates.landmarks.iter().map(|l| l.hallway).collect();
    halls.sort_unstable();
    halls.dedup();
    halls.retain(|&h| candidates.on_edge(h, Side::Left).len() >= 2 && candidates.on_edge(h, Side::Right).len() >= 2);
    if halls.is_empty() {
        return Err(HypothesisError::NoMapMatch);
    }
    let hallway = halls[rng.random_range(0..halls.len())];
    let travel = if rng.random_bool(0.5) { Travel::Forward } else { Travel::Backward };
    let tol = 2.0 * cfg.inlier_threshold;
    let g = |i: usize| points[image[i]].as_array();
    let consistent = |m: [f64; 2], n: [f64; 2], i: usize, j: usize| (dist(m, n) - dist(g(i), g(j))).abs() <= tol;

    let first = candidates.on_edge(hallway, travel.map_side(Side::Left));
    let mut options = Vec::new();
    for a in &first {
        for b in &first {
            if travel.ordered(a, b) && consistent(a.position, b.position, 0, 1) {
                options.push((*a, *b));
            }
        }
    }
    if options.is_empty() {
        return Err(HypothesisError::NoMapMatch);
    }
    let (a, b) = options[rng.random_range(0..options.len())];

    let second = candidates.on_edge(hallway, travel.map_side(Side::Right));
    let mut options = Vec::new();
    for c in &second {
        for d in &second {
            if travel.ordered(c, d)
                && consistent(c.position, d.position, 2, 3)
                && consistent(a.position, c.position, 0, 2)
                && consistent(a.position, d.position, 0, 3)
                && consistent(b.position, c.position, 1, 2)
                && consistent(b.position, d.position, 1, 3)
            {
                options.push((*c, *d));
            }
        }
    }
    if options.is_empty() {
        return Err(HypothesisError::NoMapMatch);
    }
    let (c, d) = options[rng.random_range(0..options.len())];
    Ok(CorrespondenceHypothesis {
        image,
        map: [a, b, c, d],
        hallway,
        travel,
    })
}

/// One detected point matched to a plan landmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assignment {
    pub point: usize,
    pub landmark: u32,
    /// map-frame distance after transforming the point, meters
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisScore {
    pub pose: Pose2D,
    /// Nearest-first greedy one-to-one matches within the threshold.
    pub inliers: Vec<Assignment>,
    /// RMS of the inlier distances.
    pub rms: f64,
}

/// Transforms every point with `pose` and greedily matches it to the
/// nearest unused landmark within `threshold`, globally nearest pair
/// first (ties by point index, then landmark id).
pub fn assign_inliers(pose: &Pose2D, points: &[GroundPoint], landmarks: &[MapLandmark], threshold: f64) -> Vec<Assignment> {
    let mut close = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let m = pose.transform(*p);
        for l in landmarks {
            let d = dist(m, l.position);
            if d <= threshold {
                close.push(Assignment {
                    point: i,
                    landmark: l.id,
                    distance: d,
                });
            }
        }
    }
    close.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.point.cmp(&b.point))
            .then(a.landmark.cmp(&b.landmark))
    });
    let mut used_points = vec![false; points.len()];
    let mut used_landmarks = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for a in close {
        if !used_points[a.point] && !used_landmarks.contains(&a.landmark) {
            used_points[a.point] = true;
            used_landmarks.insert(a.landmark);
            out.push(a);
        }
    }
    out
}

fn rms_of(assignments: &[Assignment]) -> f64 {
    if assignments.is_empty() {
        return 0.0;
    }
    (assignments.iter().map(|a| a.distance * a.distance).sum::<f64>() / assignments.len() as f64).sqrt()
}

/// Fits a pose to the hypothesis pairs and counts how many detected
/// points it explains. The inlier set is empty when any of the four
/// sample pairs misses by more than the inlier threshold.
pub fn score_hypothesis(
    h: &CorrespondenceHypothesis,
    points: &[GroundPoint],
    landmarks: &[MapLandmark],
    cfg: &RansacConfig,
) -> Result<HypothesisScore, GeometryError> {
    let pairs = h.pairs(points);
    let fit = estimate_rigid_2d(&pairs)?;
    // a sample that does not fit its own pose explains nothing
    let consistent = pairs.iter().all(|(g, m)| dist(fit.pose.transform(*g), *m) <= cfg.inlier_threshold);
    let inliers = if consistent {
        assign_inliers(&fit.pose, points, landmarks, cfg.inlier_threshold)
    } else {
        Vec::new()
    };
    let rms = rms_of(&inliers);
    Ok(HypothesisScore {
        pose: fit.pose,
        inliers,
        rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    DegradedWlanOnly,
    Failed,
}

/// Why the vision branch did not produce a pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradeReason {
    TooFewLandmarks,
    MissingEdgeLine,
    NoCandidates,
    TooFewInliers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RansacStats {
    pub scored: usize,
    pub exhausted: usize,
    pub no_map_match: usize,
    pub degenerate: usize,
    /// Samples that did not fit their own pose.
    pub inconsistent: usize,
    /// Poses discarded for falling outside the search disc.
    pub gated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseSource {
    Wlan,
    WholePlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoarseReport {
    pub center: [f64; 2],
    pub radius: f64,
    pub source: CoarseSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StageCounts {
    pub regions: usize,
    pub contours: usize,
    pub corners: usize,
    pub floor_corners: usize,
    pub micro_landmarks: usize,
    pub left_line: usize,
    pub right_line: usize,
    pub candidates: usize,
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTimings {
    pub illumination: f64,
    pub mean_shift: f64,
    pub labelling: f64,
    pub corners: f64,
    pub wlan: f64,
    pub ransac: f64,
    pub total: f64,
}

/// Result document. Field order is the serialisation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationResult {
    pub status: Status,
    pub pose: Pose2D,
    /// False when the pose is the coarse center and carries no heading.
    pub heading_valid: bool,
    pub inliers: usize,
    /// RMS of the refined pose over the inlier set, meters.
    pub rms: Option<f64>,
    /// RMS of the best raw hypothesis over the same set, meters.
    pub raw_rms: Option<f64>,
    pub iterations: usize,
    pub coarse: CoarseReport,
    pub degraded_reason: Option<DegradeReason>,
    pub matches: Vec<Assignment>,
    pub stats: RansacStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<StageCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<StageTimings>,
}

impl LocalizationResult {
    pub fn degraded(coarse: CoarseReport, reason: DegradeReason, iterations: usize, stats: RansacStats) -> Self {
        Self {
            status: Status::DegradedWlanOnly,
            pose: Pose2D {
                x: coarse.center[0],
                y: coarse.center[1],
                theta: 0.0,
            },
            heading_valid: false,
            inliers: 0,
            rms: None,
            raw_rms: None,
            iterations,
            coarse,
            degraded_reason: Some(reason),
            matches: Vec::new(),
            stats,
            counts: None,
            timings_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serialises");
        s.push('\n');
        s
    }
}

/// Disc holding every landmark the camera could have seen: the camera
/// stands inside the coarse disc and sees as far as its farthest point.
pub fn search_disc(points: &[GroundPoint], coarse: &CoarseReport) -> CoarseEstimate {
    let reach = points.iter().map(|p| p.forward.hypot(p.left)).fold(0.0, f64::max);
    CoarseEstimate {
        center: coarse.center,
        radius: coarse.radius + reach,
    }
}

/// The RANSAC search proper, on floor points already projected into the
/// camera ground frame. Never fails: any unmet precondition yields a
/// `degraded_wlan_only` result at the coarse center.
pub fn ransac_locate(points: &[GroundPoint], plan: &FloorPlan, coarse: &CoarseReport, cfg: &RansacConfig) -> LocalizationResult {
    let disc = CoarseEstimate {
        center: coarse.center,
        radius: coarse.radius,
    };
    let mut stats = RansacStats::default();
    if points.len() < 4 {
        return LocalizationResult::degraded(*coarse, DegradeReason::TooFewLandmarks, 0, stats);
    }
    let lines = match fit_edge_lines(points) {
        Ok(l) => ImageLines {
            left: l.left.map(|f| f.members).unwrap_or_default(),
            right: l.right.map(|f| f.members).unwrap_or_default(),
        },
        Err(_) => ImageLines::default(),
    };
    if lines.left.len() < 2 || lines.right.len() < 2 {
        return LocalizationResult::degraded(*coarse, DegradeReason::MissingEdgeLine, 0, stats);
    }
    let Ok(candidates) = candidate_landmarks(plan, &search_disc(points, coarse)) else {
        return LocalizationResult::degraded(*coarse, DegradeReason::NoCandidates, 0, stats);
    };
    let all = plan.map_landmarks();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<HypothesisScore> = None;
    for _ in 0..cfg.max_iterations {
        let h = match generate_hypothesis(&mut rng, points, &lines, &candidates, cfg) {
            Ok(h) => h,
            Err(HypothesisError::Exhausted) => {
                stats.exhausted += 1;
                continue;
            }
            Err(HypothesisError::NoMapMatch) => {
                stats.no_map_match += 1;
                continue;
            }
        };
        let Ok(score) = score_hypothesis(&h, points, &all, cfg) else {
            stats.degenerate += 1;
            continue;
        };
        stats.scored += 1;
        if score.inliers.is_empty() {
            stats.inconsistent += 1;
            continue;
        }
        if !disc.contains([score.pose.x, score.pose.y]) {
            stats.gated += 1;
            continue;
        }
        // strict comparison keeps the earliest iteration on ties
        let better = match &best {
            None => true,
            Some(b) => score.inliers.len() > b.inliers.len() || (score.inliers.len() == b.inliers.len() && score.rms < b.rms),
        };
        if better {
            best = Some(score);
        }
    }

    let iterations = cfg.max_iterations;
    let Some(best) = best.filter(|b| b.inliers.len() >= cfg.min_inliers) else {
        return LocalizationResult::degraded(*coarse, DegradeReason::TooFewInliers, iterations, stats);
    };
    let landmark_pos = |id: u32| all.iter().find(|l| l.id == id).expect("assigned landmark exists").position;
    let pairs: Vec<(GroundPoint, [f64; 2])> = best.inliers.iter().map(|a| (points[a.point], landmark_pos(a.landmark))).collect();
    let (pose, rms) = match estimate_rigid_2d(&pairs) {
        Ok(fit) => (fit.pose, fit.rms),
        Err(_) => (best.pose, best.rms),
    };
    let raw_rms = rms_residual(&best.pose, &pairs);
    let matches = best
        .inliers
        .iter()
        .map(|a| Assignment {
            distance: dist(pose.transform(points[a.point]), landmark_pos(a.landmark)),
            ..*a
        })
        .collect();
    LocalizationResult {
        status: Status::Ok,
        pose,
        heading_valid: true,
        inliers: best.inliers.len(),
        rms: Some(rms),
        raw_rms: Some(raw_rms),
        iterations,
        coarse: *coarse,
        degraded_reason: None,
        matches,
        stats,
        counts: None,
        timings_ms: None,
    }
}
