//! Camera model, image-to-floor projection, edge-line fitting and 2-D rigid
//! registration.
//!
//! Frames used throughout the crate:
//!
//! * **image**: `u` right, `v` down, pixels.
//! * **ground**: camera-centred floor frame, `forward` along the optical
//!   axis projected onto the floor, `left` to its left, metres.
//! * **map**: floor-plan frame, metres. A [`Pose2D`] maps ground to map:
//!   `map = R(theta) * ground + (x, y)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::imgcore::PixelCoord;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("pixel row {v} does not reach the floor (horizon at row {horizon_row:.2})")]
    NoIntersection { v: f64, horizon_row: f64 },
    #[error("invalid camera model: {0}")]
    InvalidCamera(&'static str),
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("degenerate configuration: ground points are coincident")]
    Degenerate,
    #[error("neither edge line has two supporting points")]
    NoEdgeLines,
}

/// Pinhole camera at a fixed height above the floor, pitched down by
/// `pitch` radians. No lens distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "height_m")]
    pub height: f64,
    #[serde(rename = "pitch_rad")]
    pub pitch: f64,
}

impl Default for CameraModel {
    /// 640x480 sensor, roughly 65 degree horizontal field of view, held at
    /// chest height and tilted slightly down the hallway.
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            height: 1.4,
            pitch: 0.25,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidCamera("focal lengths must be positive"));
        }
        if self.height.is_nan() || self.height <= 0.0 {
            return Err(GeometryError::InvalidCamera("height must be positive"));
        }
        if !(0.0..PI / 2.0).contains(&self.pitch) {
            return Err(GeometryError::InvalidCamera("pitch must lie in [0, pi/2)"));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(GeometryError::InvalidCamera("principal point must be finite"));
        }
        Ok(())
    }

    /// Image row of the horizon (rays at or above it never meet the floor).
    pub fn horizon_row(&self) -> f64 {
        self.cy - self.fy * self.pitch.tan()
    }

    /// Direction of the ray through sub-pixel `(u, v)` in the ground frame,
    /// as `(forward, left, up)`; not normalised.
    pub fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        let a = (u - self.cx) / self.fx;
        let b = (v - self.cy) / self.fy;
        let (s, c) = self.pitch.sin_cos();
        [c - b * s, -a, -(s + b * c)]
    }

    /// Projects a point given relative to the camera centre in the ground
    /// frame axes (`forward`, `left`, `up`) into the image. `None` when the
    /// point is not in front of the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        let (s, c) = self.pitch.sin_cos();
        let xc = -p[1];
        let yc = -p[0] * s - p[2] * c;
        let zc = p[0] * c - p[2] * s;
        if zc <= 1e-9 {
            return None;
        }
        Some((self.cx + self.fx * xc / zc, self.cy + self.fy * yc / zc))
    }

    /// Image position of a floor point.
    pub fn project_ground(&self, g: GroundPoint) -> Option<(f64, f64)> {
        self.project([g.forward, g.left, -self.height])
    }
}

/// Floor point in the camera-centred ground frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub forward: f64,
    pub left: f64,
}

impl GroundPoint {
    pub const fn new(forward: f64, left: f64) -> Self {
        Self { forward, left }
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.forward, self.left]
    }

    pub fn distance(self, other: GroundPoint) -> f64 {
        (self.forward - other.forward).hypot(self.left - other.left)
    }
}

/// Back-projects a pixel centre onto the floor.
pub fn image_to_ground(p: PixelCoord, cam: &CameraModel) -> Result<GroundPoint, GeometryError> {
    pixel_to_ground(p.u as f64, p.v as f64, cam)
}

/// Sub-pixel variant of [`image_to_ground`].
pub fn pixel_to_ground(u: f64, v: f64, cam: &CameraModel) -> Result<GroundPoint, GeometryError> {
    let d = cam.ray(u, v);
    let no_hit = || GeometryError::NoIntersection {
        v,
        horizon_row: cam.horizon_row(),
    };
    // the floor sits `height` below the camera centre
    if d[2] >= -1e-12 {
        return Err(no_hit());
    }
    let t = cam.height / -d[2];
    let g = GroundPoint::new(t * d[0], t * d[1]);
    if g.forward <= 0.0 {
        return Err(no_hit());
    }
    Ok(g)
}

/// Planar pose: position in the map plus heading of the camera's forward
/// axis, `theta` in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    /// Ground frame to map frame.
    pub fn transform(&self, g: GroundPoint) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * g.forward - s * g.left + self.x, s * g.forward + c * g.left + self.y]
    }

    /// Map frame to ground frame.
    pub fn inverse_transform(&self, m: [f64; 2]) -> GroundPoint {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (m[0] - self.x, m[1] - self.y);
        GroundPoint::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let p = self.transform(GroundPoint::new(other.x, other.y));
        Pose2D::new(p[0], p[1], self.theta + other.theta)
    }

    pub fn position_error(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn heading_error(&self, other: &Pose2D) -> f64 {
        normalize_angle(self.theta - other.theta).abs()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Infinite line through `point` with unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line2D {
    pub direction: [f64; 2],
    pub point: [f64; 2],
    pub support: usize,
}

impl Line2D {
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let (dx, dy) = (p[0] - self.point[0], p[1] - self.point[1]);
        (dx * self.direction[1] - dy * self.direction[0]).abs()
    }

    /// Signed position of the foot of `p` along the line.
    pub fn along(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.point[0]) * self.direction[0] + (p[1] - self.point[1]) * self.direction[1]
    }
}

/// One fitted hallway edge: the line plus the indices (into the input
/// slice) of its surviving points, ordered nearest-to-camera first.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFit {
    pub line: Line2D,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLines {
    pub left: Option<EdgeFit>,
    pub right: Option<EdgeFit>,
}

/// Splits floor points by the sign of `left`, fits each side by total
/// least squares, drops points farther than 3 MAD from that provisional
/// fit and refits. A side with fewer than two survivors is `None`.
pub fn fit_edge_lines(points: &[GroundPoint]) -> Result<EdgeLines, GeometryError> {
    let left: Vec<usize> = (0..points.len()).filter(|&i| points[i].left > 0.0).collect();
    let right: Vec<usize> = (0..points.len()).filter(|&i| points[i].left < 0.0).collect();
    let lines = EdgeLines {
        left: fit_side(points, &left),
        right: fit_side(points, &right),
    };
    if lines.left.is_none() && lines.right.is_none() {
        return Err(GeometryError::NoEdgeLines);
    }
    Ok(lines)
}

fn fit_side(points: &[GroundPoint], idx: &[usize]) -> Option<EdgeFit> {
    if idx.len() < 2 {
        return None;
    }
    let provisional = total_least_squares(idx.iter().map(|&i| points[i].as_array()))?;
    let residuals: Vec<f64> = idx.iter().map(|&i| provisional.distance(points[i].as_array())).collect();
    let mad = median(&residuals);
    // floor keeps exactly collinear sets from rejecting rounding noise
    let cutoff = (3.0 * mad).max(1e-9);
    let kept: Vec<usize> = idx.iter().zip(&residuals).filter(|(_, &r)| r <= cutoff).map(|(&i, _)| i).collect();
    if kept.len() < 2 {
        return None;
    }
    let mut line = total_least_squares(kept.iter().map(|&i| points[i].as_array()))?;
    line.support = kept.len();
    let mut members = kept;
    members.sort_by(|&a, &b| {
        line.along(points[a].as_array())
            .total_cmp(&line.along(points[b].as_array()))
            .then(a.cmp(&b))
    });
    Some(EdgeFit { line, members })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Orthogonal regression through the centroid. Direction sign is chosen
/// so the line points away from the camera (`direction[0] > 0`, ties
/// broken towards positive `direction[1]`).
fn total_least_squares(pts: impl Iterator<Item = [f64; 2]> + Clone) -> Option<Line2D> {
    let n = pts.clone().count();
    if n < 2 {
        return None;
    }
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy <= 1e-24 {
        return None;
    }
    // principal axis of the 2x2 scatter matrix
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (mut dy, mut dx) = angle.sin_cos();
    if dx < 0.0 || (dx == 0.0 && dy < 0.0) {
        dx = -dx;
        dy = -dy;
    }
    Some(Line2D {
        direction: [dx, dy],
        point: [mx, my],
        support: n,
    })
}

/// Least-squares rigid registration result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit {
    pub pose: Pose2D,
    pub rms: f64,
}

/// 2-D orthogonal Procrustes: the rotation and translation minimising
/// `sum |R g_i + t - m_i|^2`. The returned pose is the camera pose in the
/// map frame.
pub fn estimate_rigid_2d(pairs: &[(GroundPoint, [f64; 2])]) -> Result<RigidFit, GeometryError> {
    if pairs.len() < 2 {
        return Err(GeometryError::TooFewPairs {
            needed: 2,
            got: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let (mut gx, mut gy, mut mx, mut my) = (0.0, 0.0, 0.0, 0.0);
    for (g, m) in pairs {
        gx += g.forward;
        gy += g.left;
        mx += m[0];
        my += m[1];
    }
    let (gx, gy, mx, my) = (gx / n, gy / n, mx / n, my / n);

    let (mut dot, mut cross, mut spread) = (0.0, 0.0, 0.0);
    for (g, m) in pairs {
        let (ax, ay) = (g.forward - gx, g.left - gy);
        let (bx, by) = (m[0] - mx, m[1] - my);
        dot += ax * bx + ay * by;
        cross += ax * by - ay * bx;
        spread += ax * ax + ay * ay;
    }
    if spread <= 1e-18 {
        return Err(GeometryError::Degenerate);
    }
    let theta = cross.atan2(dot);
    let (s, c) = theta.sin_cos();
    let pose = Pose2D::new(mx - (c * gx - s * gy), my - (s * gx + c * gy), theta);
    Ok(RigidFit {
        pose,
        rms: rms_residual(&pose, pairs),
    })
}

/// Root-mean-square registration residual of `pose` over `pairs`.
pub fn rms_residual(pose: &Pose2D, pairs: &[(GroundPoint, [f64; 2])]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = pairs
        .iter()
        .map(|(g, m)| {
            let p = pose.transform(*g);
            (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2)
        })
        .sum();
    (sum / pairs.len() as f64).sqrt()
}
