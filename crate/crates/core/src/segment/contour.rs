use super::SegmentMap;
use crate::imgcore::PixelCoord;

/// Closed outer boundary of one region.
///
/// Points are 8-adjacent in sequence, the last adjacent to the first, and
/// run counter-clockwise as the image is displayed (`v` pointing down), so
/// the signed shoelace sum over `(u, v)` is negative for regions wider
/// than one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub region: u32,
    pub points: Vec<PixelCoord>,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point at a wrapped (possibly negative) index.
    pub fn at(&self, i: isize) -> PixelCoord {
        let n = self.points.len() as isize;
        self.points[i.rem_euclid(n) as usize]
    }

    /// Twice the signed area in image coordinates.
    pub fn shoelace(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.u as i64 * b.v as i64 - b.u as i64 * a.v as i64
            })
            .sum()
    }
}

// Moore neighbourhood, clockwise on screen starting west.
const DIRS: [(isize, isize); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn dir_index(du: isize, dv: isize) -> usize {
    DIRS.iter().position(|&d| d == (du, dv)).expect("points are 8-adjacent")
}

/// One outer contour per region, in region id order, by Moore-neighbour
/// tracing with 8-connectivity. Pixels beyond the image border count as
/// background. Tracing stops when the first move from the start pixel
/// would be repeated.
pub fn extract_boundaries(map: &SegmentMap) -> Vec<Contour> {
    let (w, h) = (map.width, map.height);
    let mut start = vec![None; map.regions.len()];
    for (i, &l) in map.labels.iter().enumerate() {
        if start[l as usize].is_none() {
            start[l as usize] = Some(PixelCoord::new(i % w, i / w));
        }
    }
    start
        .into_iter()
        .enumerate()
        .filter_map(|(r, s)| s.map(|s| trace(map, r as u32, s, w, h)))
        .collect()
}

fn trace(map: &SegmentMap, region: u32, start: PixelCoord, w: usize, h: usize) -> Contour {
    let inside =
        |u: isize, v: isize| u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h && map.labels[v as usize * w + u as usize] == region;
    let mut points = vec![start];
    let (mut cu, mut cv) = (start.u as isize, start.v as isize);
    // the start is the first region pixel in raster order, so its west
    // neighbour is outside the region
    let mut back = 0usize;
    loop {
        let mut found = None;
        for step in 1..=8 {
            let d = (back + step) % 8;
            let (nu, nv) = (cu + DIRS[d].0, cv + DIRS[d].1);
            if inside(nu, nv) {
                found = Some((d, nu, nv));
                break;
            }
        }
        let Some((d, nu, nv)) = found else {
            break; // isolated pixel
        };
        let prev = DIRS[(d + 7) % 8];
        let (pu, pv) = (cu + prev.0, cv + prev.1);
        let next = PixelCoord::new(nu as usize, nv as usize);
        if (cu, cv) == (start.u as isize, start.v as isize) && points.len() > 2 && next == points[1] {
            points.pop();
            break;
        }
        back = dir_index(pu - nu, pv - nv);
        points.push(next);
        (cu, cv) = (nu, nv);
    }
    // the clockwise neighbour search walks the boundary clockwise on
    // screen; flip it, keeping the start pixel first
    points[1..].reverse();
    Contour { region, points }
}
