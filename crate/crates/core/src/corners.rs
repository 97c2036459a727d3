//! Boundary-based corner detection and micro-landmark selection.
//!
//! The cornerity of contour point `p_i` with support half-width `k` is the
//! perpendicular distance of `p_i` from the chord `p_{i-k} p_{i+k}`,
//! divided by half the chord length:
//!
//! ```text
//! cornerity = d_perp(p_i, chord) / (|p_{i+k} - p_{i-k}| / 2 + eps)
//! ```
//!
//! Straight runs score 0, a right angle scores 1 and acute spikes score
//! above 1. A 1-pixel spur folds the contour back on itself so the chord
//! collapses; such points are suppressed rather than reported.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::PixelCoord;
use crate::segment::{Contour, SegmentMap};

const CHORD_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CornerError {
    #[error("contour of length {len} is too short for support {k}: need at least {min} points")]
    ContourTooShort { len: usize, k: usize, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CornerParams {
    /// Support half-width along the contour.
    pub k: usize,
    pub threshold: f64,
    /// Non-maximum suppression half-window along the contour.
    pub nms_window: usize,
    /// A support chord shorter than this (pixels) marks a spur.
    pub spur_chord: f64,
    /// Corners closer than this to the image border are discarded.
    pub border_margin: usize,
    /// Corners from different contours closer than this are merged.
    pub merge_radius: f64,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            k: 7,
            threshold: 0.45,
            nms_window: 7,
            spur_chord: 1.5,
            border_margin: 3,
            merge_radius: 3.0,
        }
    }
}

/// An interest point on a region boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CornerPoint {
    pub coord: PixelCoord,
    pub cornerity: f64,
    /// index into the contour list the corner was found on
    pub contour: usize,
    /// position along that contour
    pub index: usize,
}

fn support(contour: &Contour, i: usize, k: usize) -> Result<(f64, f64), CornerError> {
    let min = 2 * k + 1;
    if contour.len() < min {
        return Err(CornerError::ContourTooShort {
            len: contour.len(),
            k,
            min,
        });
    }
    let p = contour.at(i as isize);
    let a = contour.at(i as isize - k as isize);
    let b = contour.at(i as isize + k as isize);
    let (px, py) = (p.u as f64, p.v as f64);
    let (ax, ay) = (a.u as f64, a.v as f64);
    let (bx, by) = (b.u as f64, b.v as f64);
    let chord = (bx - ax).hypot(by - ay);
    let dist = if chord > 0.0 {
        ((bx - ax) * (py - ay) - (by - ay) * (px - ax)).abs() / chord
    } else {
        (px - ax).hypot(py - ay)
    };
    Ok((dist / (0.5 * chord + CHORD_EPS), chord))
}

/// Cornerity of point `i` (indices wrap around the closed contour).
pub fn cornerity(contour: &Contour, i: usize, k: usize) -> Result<f64, CornerError> {
    support(contour, i, k).map(|(score, _)| score)
}

/// All contour points with cornerity at or above the threshold that are
/// not spurs and are the strict local maximum within `nms_window` along
/// their contour (the lower index wins exact ties). Output is sorted by
/// `(contour, index)`. Contours shorter than `2k + 1` are skipped.
pub fn detect_corners(contours: &[Contour], params: &CornerParams) -> Vec<CornerPoint> {
    let mut out = Vec::new();
    for (ci, c) in contours.iter().enumerate() {
        let n = c.len();
        if n < 2 * params.k + 1 {
            continue;
        }
        let scores: Vec<(f64, f64)> = (0..n).map(|i| support(c, i, params.k).unwrap()).collect();
        let admissible = |i: usize| scores[i].0 >= params.threshold && scores[i].1 >= params.spur_chord;
        let half = params.nms_window.min((n - 1) / 2);
        for i in 0..n {
            if !admissible(i) {
                continue;
            }
            let s = scores[i].0;
            let beaten = (1..=half).any(|d| {
                [(i + d) % n, (i + n - d) % n]
                    .iter()
                    .any(|&j| admissible(j) && (scores[j].0 > s || (scores[j].0 == s && j < i)))
            });
            if !beaten {
                out.push(CornerPoint {
                    coord: c.points[i],
                    cornerity: s,
                    contour: ci,
                    index: i,
                });
            }
        }
    }
    out
}

/// Result of keeping only floor-boundary corners.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorFiltered {
    pub corners: Vec<CornerPoint>,
    /// The region taken as floor; `None` (with the input passed through)
    /// when it could not be determined.
    pub floor_region: Option<u32>,
}

/// Keeps corners lying on the boundary of the floor region, taken to be
/// the region covering the most of the bottom image row. A corner is on
/// that boundary when its pixel or one of its 8 neighbours is floor.
pub fn filter_micro_landmarks(corners: &[CornerPoint], map: &SegmentMap) -> FloorFiltered {
    let Some(floor) = (map.height > 0).then(|| map.bottom_row_majority()).flatten() else {
        return FloorFiltered {
            corners: corners.to_vec(),
            floor_region: None,
        };
    };
    let (w, h) = (map.width as isize, map.height as isize);
    let touches_floor = |p: PixelCoord| {
        (-1..=1).any(|dv| {
            (-1..=1).any(|du| {
                let (u, v) = (p.u as isize + du, p.v as isize + dv);
                u >= 0 && v >= 0 && u < w && v < h && map.labels[(v * w + u) as usize] == floor
            })
        })
    };
    FloorFiltered {
        corners: corners.iter().copied().filter(|c| touches_floor(c.coord)).collect(),
        floor_region: Some(floor),
    }
}

/// Drops corners within `margin` pixels of the image border, where region
/// boundaries are cut by the frame rather than by scene structure.
pub fn drop_border_corners(corners: &[CornerPoint], width: usize, height: usize, margin: usize) -> Vec<CornerPoint> {
    corners
        .iter()
        .copied()
        .filter(|c| c.coord.u >= margin && c.coord.v >= margin && c.coord.u + margin < width && c.coord.v + margin < height)
        .collect()
}

/// Collapses corners closer than `radius` pixels (typically the same
/// junction seen from the contours of two adjacent regions), keeping the
/// highest cornerity; ties go to the earlier `(contour, index)`. Output
/// keeps the input's `(contour, index)` order.
pub fn merge_nearby(corners: &[CornerPoint], radius: f64) -> Vec<CornerPoint> {
    let mut order: Vec<usize> = (0..corners.len()).collect();
    order.sort_by(|&a, &b| {
        corners[b]
            .cornerity
            .total_cmp(&corners[a].cornerity)
            .then((corners[a].contour, corners[a].index).cmp(&(corners[b].contour, corners[b].index)))
    });
    let mut keep = vec![false; corners.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let p = corners[i].coord;
        let close = kept.iter().any(|&j| {
            let q = corners[j].coord;
            (p.u as f64 - q.u as f64).hypot(p.v as f64 - q.v as f64) < radius
        });
        if !close {
            keep[i] = true;
            kept.push(i);
        }
    }
    corners.iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| *c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{extract_boundaries, RegionStats};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn contour(points: Vec<(usize, usize)>) -> Contour {
        Contour {
            region: 0,
            points: points.into_iter().map(|(u, v)| PixelCoord::new(u, v)).collect(),
        }
    }

    /// Ring of a filled axis-aligned square with the given side, starting at
    /// its top-left pixel and running down the left side first.
    fn square(origin: usize, side: usize) -> Contour {
        let mut pts = Vec::new();
        let s = side - 1;
        for v in 0..s {
            pts.push((origin, origin + v));
        }
        for u in 0..s {
            pts.push((origin + u, origin + s));
        }
        for v in (1..=s).rev() {
            pts.push((origin + s, origin + v));
        }
        for u in (1..=s).rev() {
            pts.push((origin + u, origin));
        }
        contour(pts)
    }

    fn label_map_from_mask(w: usize, h: usize, inside: impl Fn(usize, usize) -> bool) -> SegmentMap {
        let labels: Vec<u32> = (0..w * h).map(|i| inside(i % w, i / w) as u32).collect();
        let regions = (0..2)
            .map(|r| RegionStats {
                size: labels.iter().filter(|&&l| l == r).count(),
                mean: [0.0; 2],
            })
            .collect();
        SegmentMap {
            width: w,
            height: h,
            labels,
            regions,
        }
    }

    #[test]
    fn straight_run_scores_low() {
        let c = contour((0..40).map(|u| (u, 5)).chain((0..40).rev().map(|u| (u, 6))).collect());
        for i in 8..32 {
            assert!(cornerity(&c, i, 5).unwrap() < 0.1);
        }
        // digital line with slope 1/3
        let c = contour((0..60).map(|u| (u, 10 + u / 3)).collect());
        for i in 10..50 {
            assert!(cornerity(&c, i, 7).unwrap() < 0.1);
        }
    }

    #[test]
    fn right_angle_scores_one() {
        let k = 6;
        // vertex at (10, 10), arms along -v and +u
        let pts: Vec<_> = (0..k).map(|d| (10, 10 - k + d)).chain((0..=k).map(|d| (10 + d, 10))).collect();
        let c = contour(pts);
        // exact geometry: d_perp = k / sqrt 2 = half chord
        assert_abs_diff_eq!(cornerity(&c, k, k).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn spur_scores_high_and_is_suppressed() {
        let k = 4;
        // out along a row and straight back over the same pixels
        let mut pts: Vec<_> = (0..=k).map(|d| (10 + d, 10)).collect();
        pts.extend((0..k).rev().map(|d| (10 + d, 10)));
        let c = contour(pts);
        let score = cornerity(&c, k, k).unwrap();
        assert!(score >= 1.5, "{score}");
        let params = CornerParams {
            k,
            nms_window: k,
            ..CornerParams::default()
        };
        assert!(detect_corners(&[c], &params).is_empty());
    }

    #[test]
    fn too_short_contour_names_minimum() {
        let c = square(0, 3);
        assert_eq!(cornerity(&c, 0, 7), Err(CornerError::ContourTooShort { len: 8, k: 7, min: 15 }));
    }

    #[test]
    fn square_has_exactly_four_corners_at_its_vertices() {
        let c = square(5, 30);
        let params = CornerParams {
            k: 5,
            threshold: 0.5,
            nms_window: 5,
            ..CornerParams::default()
        };
        let found = detect_corners(&[c], &params);
        assert_eq!(found.len(), 4);
        let vertices = [(5, 5), (5, 34), (34, 34), (34, 5)];
        for (corner, (u, v)) in found.iter().zip(vertices) {
            assert!(corner.coord.u.abs_diff(u) <= 1 && corner.coord.v.abs_diff(v) <= 1);
        }
    }

    /// Largest cornerity of a continuous circle of radius `r` sampled at
    /// unit arc spacing: the chord spans an angle of `2k / r`.
    fn continuous_circle_bound(r: f64, k: usize) -> f64 {
        let half = k as f64 / r;
        (1.0 - half.cos()) / half.sin()
    }

    #[test]
    fn traced_disc_has_no_corners() {
        let map = label_map_from_mask(100, 100, |u, v| {
            (u as f64 - 50.0).powi(2) + (v as f64 - 50.0).powi(2) <= 40.0f64.powi(2)
        });
        let contours = extract_boundaries(&map);
        let disc = &contours[1];
        // brute force over every boundary point; pixel quantisation adds up
        // to one pixel of sagitta on a chord of about 2k
        let max = (0..disc.len()).map(|i| cornerity(disc, i, 5).unwrap()).fold(0.0, f64::max);
        let bound = continuous_circle_bound(40.0, 5) + 1.0 / 5.0;
        assert!(max <= bound, "max cornerity on the disc {max} > {bound}");
        let params = CornerParams {
            k: 5,
            threshold: 0.5,
            nms_window: 5,
            ..CornerParams::default()
        };
        assert!(detect_corners(&contours[1..], &params).is_empty());
    }

    #[test]
    fn traced_concave_corner_matches_closed_form() {
        // a Moore-traced reflex corner is cut by one diagonal step, giving
        // 2k^2 / (2k^2 + 2k + 1) at the cut
        for k in [3usize, 7, 12] {
            let map = label_map_from_mask(80, 80, |u, v| {
                (10..70).contains(&u) && (10..70).contains(&v) && !(u >= 40 && v >= 40)
            });
            let c = &extract_boundaries(&map)[1];
            let i = c.points.iter().position(|p| *p == PixelCoord::new(40, 39)).unwrap();
            let kf = k as f64;
            assert_abs_diff_eq!(
                cornerity(c, i, k).unwrap(),
                2.0 * kf * kf / (2.0 * kf * kf + 2.0 * kf + 1.0),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn empty_input_gives_no_corners() {
        assert!(detect_corners(&[], &CornerParams::default()).is_empty());
    }

    #[test]
    fn floor_filter_keeps_floor_boundary_only() {
        // floor = bottom half, a wall patch above it
        let map = label_map_from_mask(20, 20, |_, v| v >= 10);
        let mk = |u, v| CornerPoint {
            coord: PixelCoord::new(u, v),
            cornerity: 1.0,
            contour: 0,
            index: 0,
        };
        let on_floor = [mk(3, 10), mk(8, 9)];
        let out = filter_micro_landmarks(&on_floor, &map);
        assert_eq!(out.corners, on_floor);
        assert_eq!(out.floor_region, Some(1));
        let elsewhere = [mk(3, 2), mk(15, 5)];
        assert!(filter_micro_landmarks(&elsewhere, &map).corners.is_empty());
    }

    #[test]
    fn border_and_duplicate_corners_are_removed() {
        let mk = |u, v, s, contour| CornerPoint {
            coord: PixelCoord::new(u, v),
            cornerity: s,
            contour,
            index: 0,
        };
        let cs = [mk(1, 10, 1.0, 0), mk(10, 10, 0.9, 0), mk(11, 11, 1.2, 1), mk(30, 30, 0.6, 1)];
        assert_eq!(drop_border_corners(&cs, 40, 40, 3).len(), 3);
        let merged = merge_nearby(&cs, 3.0);
        assert_eq!(merged, vec![cs[0], cs[2], cs[3]]);
    }

    proptest! {
        #[test]
        fn cornerity_invariant_under_rotation_reflection_translation(
            side in 10usize..30, i in 0usize..200, k in 2usize..5, shift in 0usize..7, du in 0usize..20,
        ) {
            let c = square(3, side);
            let n = c.len();
            let i = i % n;
            let base = cornerity(&c, i, k).unwrap();
            // index rotation
            let mut rotated = c.points.clone();
            rotated.rotate_left(shift % n);
            let r = Contour { region: 0, points: rotated };
            prop_assert!((cornerity(&r, (i + n - shift % n) % n, k).unwrap() - base).abs() < 1e-12);
            // reversal
            let mut rev = c.points.clone();
            rev.reverse();
            let rv = Contour { region: 0, points: rev };
            prop_assert!((cornerity(&rv, n - 1 - i, k).unwrap() - base).abs() < 1e-12);
            // translation
            let moved = Contour {
                region: 0,
                points: c.points.iter().map(|p| PixelCoord::new(p.u + du, p.v + 2 * du)).collect(),
            };
            prop_assert!((cornerity(&moved, i, k).unwrap() - base).abs() < 1e-12);
            // 90 degree rotation (u, v) -> (V - v, u)
            let turned = Contour {
                region: 0,
                points: c.points.iter().map(|p| PixelCoord::new(100 - p.v, p.u)).collect(),
            };
            prop_assert!((cornerity(&turned, i, k).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn scaling_polygon_and_support_preserves_scores(a in 26usize..40, b in 26usize..40) {
            // L-shaped region traced from a mask, then at double size; the
            // reflex corner converges like 1 - 1/k, so k starts at 12
            let shape = |scale: usize| {
                label_map_from_mask(100 * scale, 100 * scale, move |u, v| {
                    let (x, y) = (u / scale, v / scale);
                    (10..10 + 2 * a).contains(&x) && (10..10 + 2 * b).contains(&y) && !(x >= 10 + a && y >= 10 + b)
                })
            };
            let small = extract_boundaries(&shape(1));
            let large = extract_boundaries(&shape(2));
            let params = |k| CornerParams { k, threshold: 0.5, nms_window: k, ..CornerParams::default() };
            let cs = detect_corners(&small[1..], &params(12));
            let cl = detect_corners(&large[1..], &params(24));
            prop_assert_eq!(cs.len(), cl.len());
            for s in &cs {
                let best = cl
                    .iter()
                    .min_by(|x, y| {
                        let dx = |c: &CornerPoint| (c.coord.u as f64 - 2.0 * s.coord.u as f64).hypot(c.coord.v as f64 - 2.0 * s.coord.v as f64);
                        dx(x).total_cmp(&dx(y))
                    })
                    .unwrap();
                prop_assert!((best.cornerity - s.cornerity).abs() <= 0.05 * s.cornerity, "{} vs {}", s.cornerity, best.cornerity);
            }
        }

        #[test]
        fn detections_are_deterministic_and_spaced(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cx = rng.random_range(20.0..40.0);
            let map = label_map_from_mask(60, 60, |u, v| {
                let (x, y) = (u as f64 - cx, v as f64 - 30.0);
                x.abs() + 0.5 * y.abs() < 18.0
            });
            let contours = extract_boundaries(&map);
            let params = CornerParams::default();
            let a = detect_corners(&contours, &params);
            prop_assert_eq!(&a, &detect_corners(&contours, &params));
            for w in a.windows(2) {
                prop_assert!((w[0].contour, w[0].index) < (w[1].contour, w[1].index));
                if w[0].contour == w[1].contour {
                    let n = contours[w[0].contour].len();
                    let gap = w[1].index - w[0].index;
                    prop_assert!(gap.min(n - gap) > params.nms_window.min((n - 1) / 2));
                }
            }
        }
    }
}
