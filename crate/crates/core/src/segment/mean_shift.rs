use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imgcore::FeatureImage;

/// Joint spatial-range mean shift parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanShiftParams {
    /// Spatial bandwidth `h_s`, pixels.
    pub spatial_bandwidth: f64,
    /// Range bandwidth `h_r`, feature units.
    pub range_bandwidth: f64,
    pub max_iter: usize,
    /// Convergence threshold on the step length in the normalised joint
    /// space `(u / h_s, v / h_s, f / h_r)`.
    pub eps: f64,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        Self {
            spatial_bandwidth: 8.0,
            range_bandwidth: 0.04,
            max_iter: 30,
            eps: 1e-3,
        }
    }
}

/// Mean shift filtering with a flat kernel.
///
/// Starting from each pixel's joint vector `(u, v, f1, f2)`, the estimate
/// is repeatedly replaced by the mean of all pixels within spatial
/// distance `h_s` *and* range distance `h_r` of it, until the normalised
/// step drops below `eps` or `max_iter` is reached. The pixel then takes
/// the range part of the mode it reached.
///
/// Rows are processed in parallel, but each pixel's computation is a fixed
/// sequential reduction, so the result is bit-identical for any thread
/// count.
///
/// # Panics
/// If `h_s < 1`, `h_r <= 0` or `max_iter == 0`.
pub fn mean_shift_filter(features: &FeatureImage, params: &MeanShiftParams) -> FeatureImage {
    assert!(params.spatial_bandwidth >= 1.0, "spatial bandwidth must be >= 1");
    assert!(params.range_bandwidth > 0.0, "range bandwidth must be > 0");
    assert!(params.max_iter >= 1, "max_iter must be >= 1");

    let (w, h) = (features.width(), features.height());
    let rows: Vec<Vec<[f64; 2]>> = (0..h)
        .into_par_iter()
        .map(|v| (0..w).map(|u| seek_mode(features, u, v, params)).collect())
        .collect();
    FeatureImage::new(w, h, rows.into_iter().flatten().collect())
}

/// Runs one mode seek from pixel `(u, v)` and returns the range part of
/// the mode.
pub fn seek_mode(features: &FeatureImage, u: usize, v: usize, params: &MeanShiftParams) -> [f64; 2] {
    let (w, h) = (features.width() as isize, features.height() as isize);
    let hs = params.spatial_bandwidth;
    let hr = params.range_bandwidth;
    let (hs2, hr2) = (hs * hs, hr * hr);
    let reach = hs.floor() as isize;
    let data = features.data();

    let start = features.get(u, v);
    let mut y = [u as f64, v as f64, start[0], start[1]];
    for _ in 0..params.max_iter {
        let cu = y[0].round() as isize;
        let cv = y[1].round() as isize;
        let (mut su, mut sv, mut s1, mut s2, mut n) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for j in (cv - reach - 1).max(0)..=(cv + reach + 1).min(h - 1) {
            let dv = j as f64 - y[1];
            let dv2 = dv * dv;
            if dv2 > hs2 {
                continue;
            }
            let row = &data[(j * w) as usize..((j + 1) * w) as usize];
            for i in (cu - reach - 1).max(0)..=(cu + reach + 1).min(w - 1) {
                let du = i as f64 - y[0];
                if du * du + dv2 > hs2 {
                    continue;
                }
                let f = row[i as usize];
                let (d1, d2) = (f[0] - y[2], f[1] - y[3]);
                if d1 * d1 + d2 * d2 > hr2 {
                    continue;
                }
                su += i as f64;
                sv += j as f64;
                s1 += d1;
                s2 += d2;
                n += 1;
            }
        }
        if n == 0 {
            break;
        }
        let nf = n as f64;
        // integer coordinate sums are exact; range offsets are taken from the
        // current estimate so a window of identical values reproduces them
        let next = [su / nf, sv / nf, y[2] + s1 / nf, y[3] + s2 / nf];
        let step = (((next[0] - y[0]) / hs).powi(2)
            + ((next[1] - y[1]) / hs).powi(2)
            + ((next[2] - y[2]) / hr).powi(2)
            + ((next[3] - y[3]) / hr).powi(2))
        .sqrt();
        y = next;
        if step < params.eps {
            break;
        }
    }
    [y[2], y[3]]
}
