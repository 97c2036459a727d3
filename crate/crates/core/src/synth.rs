//! Deterministic synthetic hallway scenes and RF measurements.
//!
//! A straight hallway runs along the map `y` axis. Each camera pixel's ray
//! is intersected analytically with the floor, ceiling, side walls, end
//! walls and any wall notches; the first surface hit decides the colour.
//! Surfaces are flat-shaded: `colour = chromaticity * albedo * facing *
//! falloff(distance)`, optionally darkened by floor shadows, with
//! specular highlights adding an illuminant-coloured term on top.
//! Ground-truth corners are the analytic projections of the plan
//! landmarks, independent of any defect.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuse::{FloorPlan, Hallway, Landmark, LandmarkKind, Side};
use crate::geometry::{CameraModel, GroundPoint, Pose2D};
use crate::imgcore::RgbImage;
use crate::wlan::{Fingerprint, FingerprintDb, RssScan};

/// Testbed floor, 45 ft x 105 ft.
pub const TESTBED_WIDTH_M: f64 = 13.716;
pub const TESTBED_DEPTH_M: f64 = 32.004;

pub const IMAGE_WIDTH: usize = 640;
pub const IMAGE_HEIGHT: usize = 480;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("camera at ({x:.3}, {y:.3}) is not inside the hallway")]
    CameraOutside { x: f64, y: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Surface chromaticities `(r, g, b)`, each summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceColors {
    pub floor: [f64; 3],
    pub wall: [f64; 3],
    pub door: [f64; 3],
    pub ceiling: [f64; 3],
    pub poster: [f64; 3],
}

impl Default for SurfaceColors {
    fn default() -> Self {
        Self {
            floor: [0.45, 0.33, 0.22],
            wall: [0.32, 0.34, 0.34],
            door: [0.22, 0.38, 0.40],
            ceiling: [0.33, 0.335, 0.335],
            poster: [0.50, 0.22, 0.28],
        }
    }
}

/// Doorway on one side wall, spanning `[start, end]` along `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Doorway {
    pub side: Side,
    pub start: f64,
    pub end: f64,
}

/// Rectangle painted on a side wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Poster {
    pub side: Side,
    pub start: f64,
    pub end: f64,
    pub bottom: f64,
    pub top: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Defect {
    /// Floor region (map coordinates) whose brightness is multiplied by
    /// `gain`.
    Shadow { polygon: Vec<[f64; 2]>, gain: f64 },
    /// Specular spot on the floor adding `strength * illuminant` at its
    /// center, with a Gaussian falloff of standard deviation `radius / 2`.
    Highlight {
        center: [f64; 2],
        radius: f64,
        strength: f64,
        illuminant: [f64; 3],
    },
    /// Pillar protruding `depth` meters from a side wall over
    /// `[start, end]` along `y`, floor to ceiling.
    Notch { side: Side, start: f64, end: f64, depth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub plan_width: f64,
    pub plan_depth: f64,
    /// `x` of the hallway axis.
    pub hallway_center: f64,
    pub hallway_width: f64,
    pub ceiling_height: f64,
    pub door_height: f64,
    pub doorways: Vec<Doorway>,
    pub posters: Vec<Poster>,
    pub colors: SurfaceColors,
    /// Ground-truth camera pose.
    pub pose: Pose2D,
    pub defects: Vec<Defect>,
    /// Per-channel Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Jamb positions of the testbed doorways, `(start, end)` along the
/// hallway. Spacing and widths are irregular so no shift of the pattern
/// lines up with itself.
const TESTBED_LEFT_DOORS: [(f64, f64); 8] = [
    (2.69, 3.83),
    (4.80, 5.80),
    (7.13, 8.02),
    (10.88, 11.82),
    (12.98, 13.87),
    (15.85, 16.82),
    (18.70, 19.56),
    (26.87, 27.94),
];
const TESTBED_RIGHT_DOORS: [(f64, f64); 8] = [
    (5.70, 6.70),
    (9.19, 10.14),
    (15.85, 16.93),
    (17.90, 18.93),
    (21.52, 22.50),
    (24.45, 25.42),
    (27.45, 28.48),
    (29.91, 30.96),
];

impl SceneSpec {
    /// The testbed hallway with its doors, posters, no defects and the
    /// given camera pose.
    pub fn testbed(pose: Pose2D, seed: u64) -> Self {
        let mut doorways = Vec::new();
        for (s, e) in TESTBED_LEFT_DOORS {
            doorways.push(Doorway {
                side: Side::Left,
                start: s,
                end: e,
            });
        }
        for (s, e) in TESTBED_RIGHT_DOORS {
            doorways.push(Doorway {
                side: Side::Right,
                start: s,
                end: e,
            });
        }
        let posters = vec![
            Poster {
                side: Side::Left,
                start: 8.8,
                end: 9.6,
                bottom: 1.2,
                top: 1.8,
            },
            Poster {
                side: Side::Right,
                start: 12.4,
                end: 13.1,
                bottom: 1.3,
                top: 1.9,
            },
            Poster {
                side: Side::Left,
                start: 21.6,
                end: 22.5,
                bottom: 1.2,
                top: 1.7,
            },
            Poster {
                side: Side::Right,
                start: 7.4,
                end: 8.1,
                bottom: 1.25,
                top: 1.85,
            },
        ];
        Self {
            plan_width: TESTBED_WIDTH_M,
            plan_depth: TESTBED_DEPTH_M,
            hallway_center: TESTBED_WIDTH_M / 2.0,
            hallway_width: 3.0,
            ceiling_height: 2.7,
            door_height: 2.1,
            doorways,
            posters,
            colors: SurfaceColors::default(),
            pose,
            defects: Vec::new(),
            noise_sigma: 0.003,
            seed,
        }
    }

    /// `x` of a side wall when walking along `+y`.
    pub fn wall_x(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.hallway_center - self.hallway_width / 2.0,
            Side::Right => self.hallway_center + self.hallway_width / 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidScene(m.to_string()));
        if !(self.hallway_width > 0.0 && self.ceiling_height > self.door_height && self.door_height > 0.0) {
            return bad("hallway dimensions");
        }
        if self.wall_x(Side::Left) < 0.0 || self.wall_x(Side::Right) > self.plan_width {
            return bad("hallway outside plan");
        }
        for d in &self.doorways {
            if !(0.0 <= d.start && d.start < d.end && d.end <= self.plan_depth) {
                return bad("doorway outside hallway extent");
            }
        }
        for c in [
            self.colors.floor,
            self.colors.wall,
            self.colors.door,
            self.colors.ceiling,
            self.colors.poster,
        ] {
            if (c.iter().sum::<f64>() - 1.0).abs() > 1e-9 || c.iter().any(|&v| v < 0.0) {
                return bad("chromaticity must be non-negative and sum to 1");
            }
        }
        for d in &self.defects {
            if let Defect::Shadow { gain, .. } = d {
                if !(*gain > 0.0 && *gain <= 1.0) {
                    return bad("shadow gain must lie in (0, 1]");
                }
            }
        }
        let (x, y) = (self.pose.x, self.pose.y);
        let inside = x > self.wall_x(Side::Left) && x < self.wall_x(Side::Right) && y > 0.0 && y < self.plan_depth;
        let in_notch = self
            .notch_boxes()
            .iter()
            .any(|b| x >= b.min[0] && x <= b.max[0] && y >= b.min[1] && y <= b.max[1]);
        if !inside || in_notch {
            return Err(SynthError::CameraOutside { x, y });
        }
        Ok(())
    }

    /// The plan matching this scene: one hallway with edges running
    /// along `+y`, a jamb landmark at each doorway edge and the four
    /// floor corners at the hallway ends. Ids follow that order.
    pub fn floor_plan(&self) -> FloorPlan {
        let (xl, xr) = (self.wall_x(Side::Left), self.wall_x(Side::Right));
        let mut landmarks = Vec::new();
        let mut id = 0u32;
        for side in [Side::Left, Side::Right] {
            let mut jambs: Vec<f64> = self
                .doorways
                .iter()
                .filter(|d| d.side == side)
                .flat_map(|d| [d.start, d.end])
                .collect();
            jambs.sort_by(f64::total_cmp);
            for y in jambs {
                landmarks.push(Landmark {
                    id,
                    x_m: self.wall_x(side),
                    y_m: y,
                    kind: LandmarkKind::DoorwayJamb,
                });
                id += 1;
            }
        }
        for (x, y) in [(xl, 0.0), (xr, 0.0), (xl, self.plan_depth), (xr, self.plan_depth)] {
            landmarks.push(Landmark {
                id,
                x_m: x,
                y_m: y,
                kind: LandmarkKind::FloorCorner,
            });
            id += 1;
        }
        FloorPlan {
            width_m: self.plan_width,
            depth_m: self.plan_depth,
            floor_id: "testbed-1".into(),
            hallways: vec![Hallway {
                left: vec![[xl, 0.0], [xl, self.plan_depth]],
                right: vec![[xr, 0.0], [xr, self.plan_depth]],
            }],
            landmarks,
        }
    }

    fn notch_boxes(&self) -> Vec<Aabb> {
        self.defects
            .iter()
            .filter_map(|d| match *d {
                Defect::Notch { side, start, end, depth } => {
                    let x = self.wall_x(side);
                    let (x0, x1) = match side {
                        Side::Left => (x, x + depth),
                        Side::Right => (x - depth, x),
                    };
                    Some(Aabb {
                        min: [x0, start, 0.0],
                        max: [x1, end, self.ceiling_height],
                    })
                }
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
}

impl Aabb {
    /// Entry distance and the axis of the entry face.
    fn enter(&self, o: [f64; 3], d: [f64; 3]) -> Option<(f64, usize)> {
        let (mut t0, mut t1, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
        for k in 0..3 {
            if d[k].abs() < 1e-15 {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let (mut a, mut b) = ((self.min[k] - o[k]) / d[k], (self.max[k] - o[k]) / d[k]);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            if a > t0 {
                t0 = a;
                axis = k;
            }
            t1 = t1.min(b);
        }
        (t0 <= t1 && t0 > 1e-9).then_some((t0, axis))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Surface {
    Floor,
    Ceiling,
    Wall(Side),
    EndWall,
    /// notch face, by the axis of its normal
    Notch(usize),
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t: f64,
    surface: Surface,
    point: [f64; 3],
}

/// Camera ray for pixel `(u, v)` in map axes `(x, y, z)`, unit length.
fn world_ray(cam: &CameraModel, pose: &Pose2D, u: f64, v: f64) -> [f64; 3] {
    let r = cam.ray(u, v);
    let (s, c) = pose.theta.sin_cos();
    let d = [c * r[0] - s * r[1], s * r[0] + c * r[1], r[2]];
    let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    [d[0] / n, d[1] / n, d[2] / n]
}

fn cast(spec: &SceneSpec, notches: &[Aabb], o: [f64; 3], d: [f64; 3]) -> Option<Hit> {
    let mut best: Option<(f64, Surface)> = None;
    let mut consider = |t: f64, s: Surface| {
        if t > 1e-9 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, s));
        }
    };
    if d[2] < 0.0 {
        consider(-o[2] / d[2], Surface::Floor);
    }
    if d[2] > 0.0 {
        consider((spec.ceiling_height - o[2]) / d[2], Surface::Ceiling);
    }
    if d[0] < 0.0 {
        consider((spec.wall_x(Side::Left) - o[0]) / d[0], Surface::Wall(Side::Left));
    }
    if d[0] > 0.0 {
        consider((spec.wall_x(Side::Right) - o[0]) / d[0], Surface::Wall(Side::Right));
    }
    if d[1] < 0.0 {
        consider(-o[1] / d[1], Surface::EndWall);
    }
    if d[1] > 0.0 {
        consider((spec.plan_depth - o[1]) / d[1], Surface::EndWall);
    }
    for b in notches {
        if let Some((t, axis)) = b.enter(o, d) {
            consider(t, Surface::Notch(axis));
        }
    }
    best.map(|(t, surface)| Hit {
        t,
        surface,
        point: [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]],
    })
}

/// Even-odd point-in-polygon test.
fn point_in_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
    }
    inside
}

const ALBEDO_FLOOR: f64 = 0.75;
const ALBEDO_WALL: f64 = 0.85;
const ALBEDO_DOOR: f64 = 0.65;
const ALBEDO_CEILING: f64 = 0.9;
const ALBEDO_POSTER: f64 = 0.7;

fn falloff(distance: f64) -> f64 {
    1.0 / (1.0 + 0.002 * distance * distance)
}

fn shade(spec: &SceneSpec, hit: &Hit) -> [f64; 3] {
    let c = &spec.colors;
    let p = hit.point;
    let on_wall = |side: Side| -> ([f64; 3], f64) {
        if let Some(q) = spec
            .posters
            .iter()
            .find(|q| q.side == side && (q.start..=q.end).contains(&p[1]) && (q.bottom..=q.top).contains(&p[2]))
        {
            let _ = q;
            return (c.poster, ALBEDO_POSTER);
        }
        if spec
            .doorways
            .iter()
            .any(|d| d.side == side && (d.start..=d.end).contains(&p[1]) && p[2] <= spec.door_height)
        {
            return (c.door, ALBEDO_DOOR);
        }
        (c.wall, ALBEDO_WALL)
    };
    let (chroma, albedo, facing) = match hit.surface {
        Surface::Floor => (c.floor, ALBEDO_FLOOR, 1.0),
        Surface::Ceiling => (c.ceiling, ALBEDO_CEILING, 0.95),
        Surface::Wall(Side::Left) => {
            let (ch, a) = on_wall(Side::Left);
            (ch, a, 0.85)
        }
        Surface::Wall(Side::Right) => {
            let (ch, a) = on_wall(Side::Right);
            (ch, a, 0.8)
        }
        Surface::EndWall => (c.wall, ALBEDO_WALL, 0.75),
        Surface::Notch(axis) => (c.wall, ALBEDO_WALL, if axis == 0 { 0.9 } else { 0.7 }),
    };
    let mut i = albedo * facing * falloff(hit.t);
    let mut extra = [0.0; 3];
    if hit.surface == Surface::Floor {
        for d in &spec.defects {
            match d {
                Defect::Shadow { polygon, gain } if point_in_polygon(polygon, [p[0], p[1]]) => i *= gain,
                Defect::Highlight {
                    center,
                    radius,
                    strength,
                    illuminant,
                } => {
                    let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                    let sigma = radius / 2.0;
                    let m = strength * (-r2 / (2.0 * sigma * sigma)).exp();
                    for k in 0..3 {
                        extra[k] += m * illuminant[k];
                    }
                }
                _ => {}
            }
        }
    }
    [chroma[0] * i + extra[0], chroma[1] * i + extra[1], chroma[2] * i + extra[2]]
}

/// One analytically projected corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthCorner {
    /// Sub-pixel image position `(u, v)`.
    pub pixel: [f64; 2],
    /// Lies on the floor boundary.
    pub floor: bool,
    /// Plan landmark this corner is, if any.
    pub landmark_id: Option<u32>,
    /// Distance ahead of the camera on the floor, meters.
    pub range: f64,
    /// Shorter of the two image edges meeting at the corner, in contour
    /// steps (Chebyshev pixels).
    pub support_px: f64,
}

impl TruthCorner {
    /// Whether a detector with support `k` can see this corner: both arms
    /// at least `k` steps long, the support fully inside the frame, and
    /// within `max_range` meters.
    pub fn resolvable(&self, k: usize, width: usize, height: usize, max_range: f64) -> bool {
        let m = k as f64;
        self.support_px >= m
            && self.range <= max_range
            && self.pixel[0] >= m
            && self.pixel[1] >= m
            && self.pixel[0] <= width as f64 - 1.0 - m
            && self.pixel[1] <= height as f64 - 1.0 - m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub pose: Pose2D,
    pub corners: Vec<TruthCorner>,
    /// Landmarks whose corner is visible, ascending.
    pub landmarks_in_view: Vec<u32>,
}

struct Projector<'a> {
    spec: &'a SceneSpec,
    cam: &'a CameraModel,
    notches: Vec<Aabb>,
    width: usize,
    height: usize,
}

impl Projector<'_> {
    fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let g = self.spec.pose.inverse_transform([p[0], p[1]]);
        self.cam.project([g.forward, g.left, p[2] - self.cam.height]).map(|(u, v)| [u, v])
    }

    fn in_frame(&self, px: [f64; 2]) -> bool {
        px[0] >= 0.0 && px[1] >= 0.0 && px[0] <= (self.width - 1) as f64 && px[1] <= (self.height - 1) as f64
    }

    /// Nothing closer than `p` on the ray towards it.
    fn unoccluded(&self, p: [f64; 3]) -> bool {
        let o = [self.spec.pose.x, self.spec.pose.y, self.cam.height];
        let d = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let dir = [d[0] / len, d[1] / len, d[2] / len];
        cast(self.spec, &self.notches, o, dir).is_none_or(|h| h.t >= len - 1e-6)
    }

    fn chebyshev(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        match (self.project(a), self.project(b)) {
            (Some(pa), Some(pb)) => (pa[0] - pb[0]).abs().max((pa[1] - pb[1]).abs()),
            _ => f64::INFINITY,
        }
    }

    /// Corner at `p` whose arms run to each of `arms`.
    fn corner(&self, p: [f64; 3], arms: &[[f64; 3]], floor: bool, landmark_id: Option<u32>) -> Option<TruthCorner> {
        let px = self.project(p)?;
        if !self.in_frame(px) || !self.unoccluded(p) {
            return None;
        }
        let support_px = arms.iter().map(|&a| self.chebyshev(p, a)).fold(f64::INFINITY, f64::min);
        let g = self.spec.pose.inverse_transform([p[0], p[1]]);
        Some(TruthCorner {
            pixel: px,
            floor,
            landmark_id,
            range: g.forward,
            support_px,
        })
    }
}

fn ground_truth(spec: &SceneSpec, cam: &CameraModel, width: usize, height: usize) -> GroundTruth {
    let pr = Projector {
        spec,
        cam,
        notches: spec.notch_boxes(),
        width,
        height,
    };
    let plan = spec.floor_plan();
    let mut corners = Vec::new();
    let h = spec.door_height;
    for l in &plan.landmarks {
        let p = [l.x_m, l.y_m, 0.0];
        let c = match l.kind {
            LandmarkKind::DoorwayJamb => {
                // the jamb edge up, and the longer run of wall base to the
                // neighbouring junction on either side
                let side = if l.x_m < spec.hallway_center { Side::Left } else { Side::Right };
                let mut stops: Vec<f64> = plan
                    .landmarks
                    .iter()
                    .filter(|o| o.id != l.id && (o.x_m - l.x_m).abs() < 1e-9)
                    .map(|o| o.y_m)
                    .collect();
                stops.extend([0.0, spec.plan_depth]);
                let before = stops.iter().copied().filter(|&y| y < l.y_m).fold(f64::NEG_INFINITY, f64::max);
                let after = stops.iter().copied().filter(|&y| y > l.y_m).fold(f64::INFINITY, f64::min);
                let x = spec.wall_x(side);
                let run = pr
                    .chebyshev(p, [x, before.max(0.0), 0.0])
                    .max(pr.chebyshev(p, [x, after.min(spec.plan_depth), 0.0]));
                pr.corner(p, &[[l.x_m, l.y_m, h]], true, Some(l.id)).map(|mut c| {
                    c.support_px = c.support_px.min(run);
                    c
                })
            }
            LandmarkKind::FloorCorner => {
                let other_x = if l.x_m < spec.hallway_center {
                    spec.wall_x(Side::Right)
                } else {
                    spec.wall_x(Side::Left)
                };
                let toward = if l.y_m < spec.plan_depth / 2.0 { 1.0 } else { -1.0 };
                pr.corner(
                    p,
                    &[[l.x_m, l.y_m, h], [other_x, l.y_m, 0.0], [l.x_m, l.y_m + toward, 0.0]],
                    true,
                    Some(l.id),
                )
            }
        };
        corners.extend(c);
    }
    // unmapped floor corners at notch bases
    for b in pr.notches.clone() {
        for x in [b.min[0], b.max[0]] {
            for y in [b.min[1], b.max[1]] {
                let p = [x, y, 0.0];
                let other_x = if x == b.min[0] { b.max[0] } else { b.min[0] };
                corners.extend(pr.corner(p, &[[x, y, h], [other_x, y, 0.0]], true, None));
            }
        }
    }
    // doorway tops and posters are off the floor
    for d in &spec.doorways {
        let x = spec.wall_x(d.side);
        for y in [d.start, d.end] {
            corners.extend(pr.corner([x, y, h], &[[x, y, 0.0], [x, d.start + d.end - y, h]], false, None));
        }
    }
    for q in &spec.posters {
        let x = spec.wall_x(q.side);
        for y in [q.start, q.end] {
            for z in [q.bottom, q.top] {
                let oy = q.start + q.end - y;
                let oz = q.bottom + q.top - z;
                corners.extend(pr.corner([x, y, z], &[[x, oy, z], [x, y, oz]], false, None));
            }
        }
    }
    let mut landmarks_in_view: Vec<u32> = corners.iter().filter_map(|c| c.landmark_id).collect();
    landmarks_in_view.sort_unstable();
    GroundTruth {
        pose: spec.pose,
        corners,
        landmarks_in_view,
    }
}

/// Renders `spec` at 640x480 through `cam`.
pub fn render_hallway(spec: &SceneSpec, cam: &CameraModel) -> Result<(RgbImage, GroundTruth), SynthError> {
    render_hallway_sized(spec, cam, IMAGE_WIDTH, IMAGE_HEIGHT)
}

pub fn render_hallway_sized(
    spec: &SceneSpec,
    cam: &CameraModel,
    width: usize,
    height: usize,
) -> Result<(RgbImage, GroundTruth), SynthError> {
    spec.validate()?;
    cam.validate().map_err(|e| SynthError::InvalidScene(e.to_string()))?;
    let notches = spec.notch_boxes();
    let o = [spec.pose.x, spec.pose.y, cam.height];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| SynthError::InvalidScene(e.to_string()))?;
    let img = RgbImage::from_fn(width, height, |u, v| {
        let d = world_ray(cam, &spec.pose, u as f64, v as f64);
        let rgb = cast(spec, &notches, o, d).map_or([0.0; 3], |h| shade(spec, &h));
        if spec.noise_sigma > 0.0 {
            [
                rgb[0] + noise.sample(&mut rng),
                rgb[1] + noise.sample(&mut rng),
                rgb[2] + noise.sample(&mut rng),
            ]
        } else {
            rgb
        }
    });
    Ok((img, ground_truth(spec, cam, width, height)))
}

/// Failure modes staged after the five test locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Dark shadow from poor lighting.
    A,
    /// Sunlight through a window: stripes of shadow and a warm highlight.
    B,
    /// Scattered shadows of unseen obstacles.
    C,
    /// Wall notch with a shadow beside it.
    D,
    /// Wall notch with a highlight beside it.
    E,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::A, Preset::B, Preset::C, Preset::D, Preset::E];

    /// Defects placed relative to `pose` so they are in view.
    pub fn defects(self, pose: &Pose2D, spec: &SceneSpec) -> Vec<Defect> {
        let at = |f: f64, l: f64| pose.transform(GroundPoint::new(f, l));
        let quad = |f0: f64, f1: f64, l0: f64, l1: f64| vec![at(f0, l0), at(f1, l0), at(f1, l1), at(f0, l1)];
        let along = |f: f64| at(f, 0.0)[1];
        // map side on the camera's left / right
        let cam_left = if pose.theta.sin() >= 0.0 { Side::Left } else { Side::Right };
        let notch = |side: Side, f: f64| {
            let y = along(f);
            Defect::Notch {
                side,
                start: y.min(y + 0.5 * pose.theta.sin().signum()),
                end: y.max(y + 0.5 * pose.theta.sin().signum()),
                depth: 0.3,
            }
        };
        let warm = [0.40, 0.34, 0.26];
        let _ = spec;
        match self {
            Preset::A => vec![Defect::Shadow {
                polygon: quad(3.0, 6.5, -2.0, 0.6),
                gain: 0.35,
            }],
            Preset::B => vec![
                Defect::Shadow {
                    polygon: quad(3.0, 3.6, -2.0, 2.0),
                    gain: 0.55,
                },
                Defect::Shadow {
                    polygon: quad(5.0, 5.6, -2.0, 2.0),
                    gain: 0.55,
                },
                Defect::Shadow {
                    polygon: quad(7.5, 8.1, -2.0, 2.0),
                    gain: 0.55,
                },
                Defect::Highlight {
                    center: at(4.3, 0.3),
                    radius: 0.6,
                    strength: 0.5,
                    illuminant: warm,
                },
            ],
            Preset::C => vec![
                Defect::Shadow {
                    polygon: vec![at(3.0, 1.6), at(3.5, 1.1), at(4.0, 1.6)],
                    gain: 0.45,
                },
                Defect::Shadow {
                    polygon: quad(4.6, 5.2, -2.0, -1.0),
                    gain: 0.45,
                },
                Defect::Shadow {
                    polygon: vec![at(6.0, 0.2), at(6.4, -0.3), at(6.9, 0.1), at(6.5, 0.6)],
                    gain: 0.5,
                },
                Defect::Shadow {
                    polygon: quad(7.4, 8.0, 0.9, 2.0),
                    gain: 0.45,
                },
                Defect::Shadow {
                    polygon: quad(9.0, 9.8, -2.0, -1.1),
                    gain: 0.5,
                },
            ],
            Preset::D => vec![
                notch(cam_left, 5.5),
                Defect::Shadow {
                    polygon: quad(6.0, 7.5, 0.2, 2.0),
                    gain: 0.5,
                },
            ],
            Preset::E => vec![
                notch(cam_left.opposite(), 6.5),
                Defect::Highlight {
                    center: at(5.0, -0.4),
                    radius: 0.5,
                    strength: 0.45,
                    illuminant: warm,
                },
            ],
        }
    }
}

/// Log-distance path-loss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfModel {
    /// RSS at 1 m, dBm.
    pub p0: f64,
    /// Path-loss exponent.
    pub exponent: f64,
    /// Shadowing noise, dB.
    pub sigma: f64,
}

impl Default for RfModel {
    fn default() -> Self {
        Self {
            p0: -40.0,
            exponent: 3.0,
            sigma: 3.0,
        }
    }
}

/// BSSID-style id of the `i`-th synthetic access point.
pub fn ap_id(i: usize) -> String {
    format!("02:00:5e:10:00:{i:02x}")
}

/// Access points placed in the rooms on both sides of the testbed hallway.
pub fn testbed_access_points() -> Vec<[f64; 2]> {
    let mut v = Vec::new();
    for y in [3.5, 11.0, 19.0, 27.5] {
        v.push([2.0, y]);
        v.push([TESTBED_WIDTH_M - 2.0, y + 1.5]);
    }
    v
}

/// `rss_i = P0 - 10 n log10(max(d_i, 1 m)) + noise`, clamped to
/// `[-120, 0]` dBm. Access point `i` is named [`ap_id`]`(i)`.
pub fn simulate_rss(ap_positions: &[[f64; 2]], query: [f64; 2], model: &RfModel, seed: u64) -> RssScan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, model.sigma.max(0.0)).expect("finite sigma");
    let readings = ap_positions
        .iter()
        .enumerate()
        .map(|(i, ap)| {
            let d = (ap[0] - query[0]).hypot(ap[1] - query[1]).max(1.0);
            let n = if model.sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (ap_id(i), (model.p0 - 10.0 * model.exponent * d.log10() + n).clamp(-120.0, 0.0))
        })
        .collect();
    RssScan::new(readings).expect("at least one access point")
}

/// Survey database on a regular grid: each fingerprint is the mean of
/// `samples` noisy scans at its position.
pub fn fingerprint_grid(
    plan: &FloorPlan,
    ap_positions: &[[f64; 2]],
    spacing: f64,
    model: &RfModel,
    samples: usize,
    seed: u64,
) -> FingerprintDb {
    let mut fingerprints = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = (plan.width_m / spacing).floor() as usize;
    let ny = (plan.depth_m / spacing).floor() as usize;
    // grid centred in the plan
    let x0 = (plan.width_m - nx as f64 * spacing) / 2.0;
    let y0 = (plan.depth_m - ny as f64 * spacing) / 2.0;
    for j in 0..=ny {
        for i in 0..=nx {
            let pos = [x0 + i as f64 * spacing, y0 + j as f64 * spacing];
            let mut sums = std::collections::BTreeMap::<String, f64>::new();
            for _ in 0..samples.max(1) {
                for (ap, rss) in simulate_rss(ap_positions, pos, model, rng.random()).readings {
                    *sums.entry(ap).or_default() += rss;
                }
            }
            fingerprints.push(Fingerprint {
                position: pos,
                readings: sums.into_iter().map(|(ap, s)| (ap, s / samples.max(1) as f64)).collect(),
            });
        }
    }
    let aps = fingerprints.iter().flat_map(|f| f.readings.keys().cloned()).collect();
    FingerprintDb {
        rows: fingerprints.iter().map(|f| f.readings.len()).sum(),
        fingerprints,
        aps,
    }
}

/// Camera-frame floor points as the vision branch would report them:
/// true landmarks with Gaussian noise plus false corners.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundScene {
    pub points: Vec<GroundPoint>,
    /// Plan landmark behind each point; `None` for false corners.
    pub landmark_ids: Vec<Option<u32>>,
}

impl GroundScene {
    pub fn true_count(&self) -> usize {
        self.landmark_ids.iter().flatten().count()
    }
}

fn closest_point(poly: &[[f64; 2]], p: [f64; 2]) -> [f64; 2] {
    let mut best = (f64::INFINITY, poly[0]);
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
        if dist < best.0 {
            best = (dist, q);
        }
    }
    best.1
}

/// Where a [`ground_scene`] puts its false corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FalseCorners {
    /// Uniform over the hallway floor.
    Floor,
    /// On a wall base, displaced across it by up to `jitter` meters.
    WallBase { jitter: f64 },
}

/// Shape of a [`ground_scene`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundSceneParams {
    pub n_true: usize,
    pub n_false: usize,
    pub max_range: f64,
    pub false_corners: FalseCorners,
    /// False corners keep at least this distance from every plan
    /// landmark, so none of them corresponds to the plan.
    pub clearance: f64,
    pub noise_sigma: f64,
}

impl Default for GroundSceneParams {
    fn default() -> Self {
        Self {
            n_true: 12,
            n_false: 5,
            max_range: 12.0,
            false_corners: FalseCorners::Floor,
            clearance: 0.5,
            noise_sigma: 0.03,
        }
    }
}

/// The `n_true` nearest plan landmarks lying between 2.2 m and
/// `max_range` ahead of `pose`, each with `noise_sigma` ground noise, then
/// `n_false` false corners in the same range placed per `false_corners`,
/// shuffled together.
pub fn ground_scene(plan: &FloorPlan, pose: &Pose2D, params: &GroundSceneParams, seed: u64) -> GroundScene {
    let GroundSceneParams {
        n_true,
        n_false,
        max_range,
        false_corners,
        noise_sigma,
        clearance,
    } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    let mut visible: Vec<(GroundPoint, u32)> = plan
        .landmarks
        .iter()
        .map(|l| (pose.inverse_transform(l.position()), l.id))
        .filter(|(g, _)| (2.2..=max_range).contains(&g.forward))
        .collect();
    visible.sort_by(|a, b| a.0.forward.total_cmp(&b.0.forward).then(a.1.cmp(&b.1)));
    visible.truncate(n_true);
    let mut items: Vec<(GroundPoint, Option<u32>)> = visible
        .into_iter()
        .map(|(g, id)| {
            let jitter = |v: f64, r: &mut ChaCha8Rng| if noise_sigma > 0.0 { v + noise.sample(r) } else { v };
            (GroundPoint::new(jitter(g.forward, &mut rng), jitter(g.left, &mut rng)), Some(id))
        })
        .collect();
    let mut placed = 0;
    for _ in 0..n_false * 1000 {
        if placed == n_false {
            break;
        }
        let hall = &plan.hallways[rng.random_range(0..plan.hallways.len())];
        let (edge, other) = if rng.random_bool(0.5) {
            (&hall.left, &hall.right)
        } else {
            (&hall.right, &hall.left)
        };
        let seg = rng.random_range(0..edge.len() - 1);
        let (a, b) = (edge[seg], edge[seg + 1]);
        let t: f64 = rng.random();
        let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let m = match false_corners {
            FalseCorners::Floor => {
                let q = closest_point(other, p);
                let u: f64 = rng.random();
                [p[0] + u * (q[0] - p[0]), p[1] + u * (q[1] - p[1])]
            }
            FalseCorners::WallBase { jitter } => {
                let len = (b[0] - a[0]).hypot(b[1] - a[1]).max(1e-12);
                let off = rng.random_range(-jitter..=jitter);
                [p[0] - off * (b[1] - a[1]) / len, p[1] + off * (b[0] - a[0]) / len]
            }
        };
        let g = pose.inverse_transform(m);
        let clear = plan.landmarks.iter().all(|l| (l.x_m - m[0]).hypot(l.y_m - m[1]) > clearance);
        if clear && (2.2..=max_range).contains(&g.forward) {
            items.push((g, None));
            placed += 1;
        }
    }
    items.shuffle(&mut rng);
    GroundScene {
        points: items.iter().map(|(g, _)| *g).collect(),
        landmark_ids: items.iter().map(|(_, id)| *id).collect(),
    }
}

/// Everything needed for one end-to-end run.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub spec: SceneSpec,
    pub image: RgbImage,
    pub truth: GroundTruth,
    pub plan: FloorPlan,
    pub scan: RssScan,
    pub db: FingerprintDb,
}

/// A random testbed pose looking along the hallway, with enough hallway
/// ahead to see several doorways.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R) -> Pose2D {
    let x = TESTBED_WIDTH_M / 2.0 + rng.random_range(-0.4..0.4);
    let yaw = rng.random_range(-8f64..8.0).to_radians();
    if rng.random_bool(0.5) {
        Pose2D::new(x, rng.random_range(1.0..19.0), std::f64::consts::FRAC_PI_2 + yaw)
    } else {
        Pose2D::new(x, rng.random_range(13.0..31.0), -std::f64::consts::FRAC_PI_2 + yaw)
    }
}

/// Which bundle [`bundle`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleKind {
    /// Random testbed pose, no defects.
    Testbed,
    /// Testbed bundle with the given failure mode staged in view.
    Preset(Preset),
    /// Testbed bundle whose image is entirely black.
    Black,
    /// Bare hallway with no doorways, the far end out of range.
    NoCorners,
}

/// The testbed survey database shared by every bundle.
pub fn testbed_db(plan: &FloorPlan) -> FingerprintDb {
    fingerprint_grid(plan, &testbed_access_points(), 3.0, &RfModel::default(), 5, 0x5eed)
}

/// The `seed`-th bundle of `kind`: scene, render, plan, survey database
/// and one scan taken at the camera position.
pub fn bundle(kind: BundleKind, seed: u64, cam: &CameraModel) -> Bundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pose = match kind {
        // mid-hallway, more than the landmark range from either end
        BundleKind::NoCorners => Pose2D::new(TESTBED_WIDTH_M / 2.0, rng.random_range(3.0..4.0), std::f64::consts::FRAC_PI_2),
        _ => random_pose(&mut rng),
    };
    let mut spec = SceneSpec::testbed(pose, rng.random());
    match kind {
        BundleKind::Preset(p) => spec.defects = p.defects(&pose, &spec),
        BundleKind::NoCorners => {
            spec.doorways.clear();
            spec.posters.clear();
        }
        BundleKind::Testbed | BundleKind::Black => {}
    }
    let (mut image, truth) = render_hallway(&spec, cam).expect("bundle poses are inside the hallway");
    if kind == BundleKind::Black {
        image = RgbImage::filled(image.width(), image.height(), [0.0; 3]);
    }
    let plan = spec.floor_plan();
    let aps = testbed_access_points();
    let db = testbed_db(&plan);
    let scan = simulate_rss(&aps, [pose.x, pose.y], &RfModel::default(), rng.random());
    Bundle {
        spec,
        image,
        truth,
        plan,
        scan,
        db,
    }
}

/// `bundle(BundleKind::Testbed, seed, cam)`.
pub fn testbed_bundle(seed: u64, cam: &CameraModel) -> Bundle {
    bundle(BundleKind::Testbed, seed, cam)
}
