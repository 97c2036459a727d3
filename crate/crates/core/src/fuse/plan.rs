use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wlan::CoarseEstimate;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("plan dimensions must be positive, got {width} x {depth}")]
    BadDimensions { width: f64, depth: f64 },
    #[error("landmark {id} at ({x}, {y}) lies outside the plan")]
    LandmarkOutside { id: u32, x: f64, y: f64 },
    #[error("landmark id {0} is used more than once")]
    DuplicateId(u32),
    #[error("hallway {hallway}: {side:?} edge needs at least 2 vertices")]
    ShortEdge { hallway: usize, side: Side },
    #[error("plan has no hallways")]
    NoHallways,
    #[error("no landmark within {radius} m of ({x}, {y}); increase the search radius")]
    NoCandidates { x: f64, y: f64, radius: f64 },
    #[error("invalid plan file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkKind {
    DoorwayJamb,
    FloorCorner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmark {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub kind: LandmarkKind,
}

impl Landmark {
    pub fn position(&self) -> [f64; 2] {
        [self.x_m, self.y_m]
    }
}

/// Both edges of a hallway, each a polyline running in the same
/// direction; `left` is on the left when walking along that direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hallway {
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
}

impl Hallway {
    pub fn edge(&self, side: Side) -> &[[f64; 2]] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorPlan {
    pub width_m: f64,
    pub depth_m: f64,
    #[serde(default)]
    pub floor_id: String,
    pub hallways: Vec<Hallway>,
    pub landmarks: Vec<Landmark>,
}

/// Distance from `p` to a polyline and the arc length of the closest
/// point along it.
pub fn polyline_projection(poly: &[[f64; 2]], p: [f64; 2]) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    let mut arc = 0.0;
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let len = len2.sqrt();
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
        if dist < best.0 {
            best = (dist, arc + t * len);
        }
        arc += len;
    }
    best
}

/// A plan landmark together with the hallway edge it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapLandmark {
    pub id: u32,
    pub position: [f64; 2],
    pub kind: LandmarkKind,
    pub hallway: usize,
    pub side: Side,
    /// Arc length along that edge, meters.
    pub arc: f64,
}

/// Hallway edge touched by the search disc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct EdgeRef {
    pub hallway: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidates {
    /// Sorted by id.
    pub landmarks: Vec<MapLandmark>,
    pub edges: Vec<EdgeRef>,
}

impl Candidates {
    /// Landmarks on one edge, ordered by arc length.
    pub fn on_edge(&self, hallway: usize, side: Side) -> Vec<MapLandmark> {
        let mut v: Vec<_> = self
            .landmarks
            .iter()
            .copied()
            .filter(|l| l.hallway == hallway && l.side == side)
            .collect();
        v.sort_by(|a, b| a.arc.total_cmp(&b.arc).then(a.id.cmp(&b.id)));
        v
    }
}

impl FloorPlan {
    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let plan: FloorPlan = serde_json::from_str(text).map_err(|e| PlanError::Parse(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialises")
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.width_m > 0.0 && self.depth_m > 0.0) {
            return Err(PlanError::BadDimensions {
                width: self.width_m,
                depth: self.depth_m,
            });
        }
        if self.hallways.is_empty() {
            return Err(PlanError::NoHallways);
        }
        for (h, hall) in self.hallways.iter().enumerate() {
            for side in [Side::Left, Side::Right] {
                if hall.edge(side).len() < 2 {
                    return Err(PlanError::ShortEdge { hallway: h, side });
                }
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for l in &self.landmarks {
            if !(0.0..=self.width_m).contains(&l.x_m) || !(0.0..=self.depth_m).contains(&l.y_m) {
                return Err(PlanError::LandmarkOutside {
                    id: l.id,
                    x: l.x_m,
                    y: l.y_m,
                });
            }
            if !ids.insert(l.id) {
                return Err(PlanError::DuplicateId(l.id));
            }
        }
        Ok(())
    }

    /// Center of the plan's bounding rectangle.
    pub fn center(&self) -> [f64; 2] {
        [self.width_m / 2.0, self.depth_m / 2.0]
    }

    /// A disc covering the whole plan, used when no WLAN estimate exists.
    pub fn whole_plan_disc(&self) -> CoarseEstimate {
        CoarseEstimate {
            center: self.center(),
            radius: 0.5 * self.width_m.hypot(self.depth_m),
        }
    }

    /// Every landmark with the hallway edge nearest to it.
    pub fn map_landmarks(&self) -> Vec<MapLandmark> {
        let mut out: Vec<MapLandmark> = self
            .landmarks
            .iter()
            .map(|l| {
                let p = l.position();
                let mut best = (f64::INFINITY, 0, Side::Left, 0.0);
                for (h, hall) in self.hallways.iter().enumerate() {
                    for side in [Side::Left, Side::Right] {
                        let (d, arc) = polyline_projection(hall.edge(side), p);
                        if d < best.0 {
                            best = (d, h, side, arc);
                        }
                    }
                }
                MapLandmark {
                    id: l.id,
                    position: p,
                    kind: l.kind,
                    hallway: best.1,
                    side: best.2,
                    arc: best.3,
                }
            })
            .collect();
        out.sort_by_key(|l| l.id);
        out
    }
}

/// Landmarks within `coarse.radius` of `coarse.center` (inclusive) and the
/// hallway edges that come within the same disc.
pub fn candidate_landmarks(plan: &FloorPlan, coarse: &CoarseEstimate) -> Result<Candidates, PlanError> {
    let landmarks: Vec<MapLandmark> = plan.map_landmarks().into_iter().filter(|l| coarse.contains(l.position)).collect();
    if landmarks.is_empty() {
        return Err(PlanError::NoCandidates {
            x: coarse.center[0],
            y: coarse.center[1],
            radius: coarse.radius,
        });
    }
    let mut edges = Vec::new();
    for (h, hall) in plan.hallways.iter().enumerate() {
        for side in [Side::Left, Side::Right] {
            if polyline_projection(hall.edge(side), coarse.center).0 <= coarse.radius {
                edges.push(EdgeRef { hallway: h, side });
            }
        }
    }
    Ok(Candidates { landmarks, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> FloorPlan {
        FloorPlan {
            width_m: 10.0,
            depth_m: 30.0,
            floor_id: "f1".into(),
            hallways: vec![Hallway {
                left: vec![[4.0, 0.0], [4.0, 30.0]],
                right: vec![[6.0, 0.0], [6.0, 30.0]],
            }],
            landmarks: vec![
                Landmark {
                    id: 3,
                    x_m: 4.0,
                    y_m: 5.0,
                    kind: LandmarkKind::DoorwayJamb,
                },
                Landmark {
                    id: 1,
                    x_m: 6.0,
                    y_m: 10.0,
                    kind: LandmarkKind::DoorwayJamb,
                },
                Landmark {
                    id: 2,
                    x_m: 4.0,
                    y_m: 15.0,
                    kind: LandmarkKind::DoorwayJamb,
                },
                Landmark {
                    id: 7,
                    x_m: 6.0,
                    y_m: 30.0,
                    kind: LandmarkKind::FloorCorner,
                },
            ],
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let plan = corridor();
        assert_eq!(FloorPlan::from_json(&plan.to_json()).unwrap(), plan);
        let mut bad = plan.clone();
        bad.landmarks[0].x_m = 11.0;
        assert!(matches!(bad.validate(), Err(PlanError::LandmarkOutside { id: 3, .. })));
        let mut dup = plan.clone();
        dup.landmarks[1].id = 3;
        assert_eq!(dup.validate(), Err(PlanError::DuplicateId(3)));
        assert!(matches!(FloorPlan::from_json("{\"width_m\": 1}"), Err(PlanError::Parse(_))));
        let unknown = plan.to_json().replacen("\"floor_id\"", "\"floors\": 2, \"floor_id\"", 1);
        assert!(FloorPlan::from_json(&unknown).is_err());
    }

    #[test]
    fn landmarks_are_assigned_to_nearest_edge_with_arc() {
        let ls = corridor().map_landmarks();
        assert_eq!(ls.iter().map(|l| l.id).collect::<Vec<_>>(), vec![1, 2, 3, 7]);
        assert_eq!((ls[0].side, ls[0].arc), (Side::Right, 10.0));
        assert_eq!((ls[1].side, ls[1].arc), (Side::Left, 15.0));
        assert_eq!((ls[3].side, ls[3].arc), (Side::Right, 30.0));
    }

    #[test]
    fn whole_plan_radius_returns_everything() {
        let plan = corridor();
        let c = candidate_landmarks(&plan, &plan.whole_plan_disc()).unwrap();
        assert_eq!(c.landmarks.len(), 4);
        assert_eq!(c.edges.len(), 2);
        assert_eq!(c.on_edge(0, Side::Left).iter().map(|l| l.id).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn small_disc_on_a_landmark_returns_it_alone() {
        let plan = corridor();
        let c = candidate_landmarks(
            &plan,
            &CoarseEstimate {
                center: [4.0, 5.0],
                radius: 1.0,
            },
        )
        .unwrap();
        assert_eq!(c.landmarks.iter().map(|l| l.id).collect::<Vec<_>>(), vec![3]);
        let err = candidate_landmarks(
            &plan,
            &CoarseEstimate {
                center: [9.0, 25.0],
                radius: 1.0,
            },
        );
        assert!(matches!(err, Err(PlanError::NoCandidates { .. })));
    }
}
