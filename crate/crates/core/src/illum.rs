//! Inverse-intensity chromaticity analysis.
//!
//! Every pixel is mapped to its chromaticity `sigma_c = c / (r + g + b)`,
//! which is unchanged by any positive scaling of the pixel: shading,
//! distance falloff and cast shadows all disappear. Specular highlights are
//! the exception, since they add light of the illuminant's colour. In the
//! plane `(1 / s, sigma_c)` the pixels of one highlit surface line up on a
//! straight line whose intercept at `1 / s = 0` is the illuminant
//! chromaticity `Gamma_c`. [`estimate_illuminant`] recovers that intercept
//! by voting, and [`normalize_illumination`] replaces highlight pixels with
//! the chromaticity of the surrounding diffuse surface.

use serde::{Deserialize, Serialize};

use crate::imgcore::{FeatureImage, RgbImage};

/// Pixels whose summed intensity falls below this are treated as black.
pub const S_MIN: f64 = 0.02;

const NEUTRAL: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChromaticityPixel {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ChromaticityPixel {
    pub const NEUTRAL: Self = Self {
        r: NEUTRAL,
        g: NEUTRAL,
        b: NEUTRAL,
    };

    pub fn of(rgb: [f64; 3]) -> Option<Self> {
        let s = rgb[0] + rgb[1] + rgb[2];
        (s >= S_MIN).then(|| Self {
            r: rgb[0] / s,
            g: rgb[1] / s,
            b: rgb[2] / s,
        })
    }

    pub fn channel(&self, c: Channel) -> f64 {
        match c {
            Channel::R => self.r,
            Channel::G => self.g,
            Channel::B => self.b,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }
}

/// Per-pixel chromaticity with a flag for pixels too dark to measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ChromaticityMap {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<ChromaticityPixel>,
    pub black: Vec<bool>,
}

pub fn chromaticity(img: &RgbImage) -> ChromaticityMap {
    let mut pixels = Vec::with_capacity(img.pixels().len());
    let mut black = Vec::with_capacity(img.pixels().len());
    for &px in img.pixels() {
        match ChromaticityPixel::of(px) {
            Some(c) => {
                pixels.push(c);
                black.push(false);
            }
            None => {
                pixels.push(ChromaticityPixel::NEUTRAL);
                black.push(true);
            }
        }
    }
    ChromaticityMap {
        width: img.width(),
        height: img.height(),
        pixels,
        black,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    fn index(self) -> usize {
        self as usize
    }
}

/// A pixel in the inverse-intensity chromaticity plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IicPoint {
    /// `1 / (r + g + b)`
    pub x: f64,
    /// chromaticity of the selected channel
    pub y: f64,
}

/// One point per non-black pixel, in row-major order.
pub fn iic_project(img: &RgbImage, channel: Channel) -> Vec<IicPoint> {
    img.pixels()
        .iter()
        .filter_map(|&px| {
            let s = px[0] + px[1] + px[2];
            (s >= S_MIN).then(|| IicPoint {
                x: 1.0 / s,
                y: px[channel.index()] / s,
            })
        })
        .collect()
}

/// Tunables for highlight detection and illuminant voting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IlluminantParams {
    /// Brightness percentile a pixel must exceed to be a highlight candidate.
    pub brightness_percentile: f64,
    /// Largest chromaticity step to a 4-neighbour allowed for a candidate;
    /// rejects pixels sitting on material boundaries.
    pub max_chroma_gradient: f64,
    /// Fewer specular samples than this yields the neutral fallback.
    pub min_points: usize,
    /// Histogram resolution over `[0, 1]`.
    pub bins: usize,
    /// Smallest connected candidate blob examined.
    pub min_blob: usize,
    /// A blob is specular when some channel drifts by at least this much
    /// across it, linearly in `1 / s`.
    pub min_chroma_shift: f64,
    /// Minimum absolute correlation between `1 / s` and the drifting channel.
    pub min_correlation: f64,
    /// Minimum `1 / s` separation of a voting pair.
    pub min_pair_dx: f64,
}

impl Default for IlluminantParams {
    fn default() -> Self {
        Self {
            brightness_percentile: 0.9,
            max_chroma_gradient: 0.03,
            min_points: 50,
            bins: 200,
            min_blob: 20,
            min_chroma_shift: 0.02,
            min_correlation: 0.8,
            min_pair_dx: 0.05,
        }
    }
}

/// A highlight-candidate pixel in IIC form, tagged with the connected blob
/// (surface patch) it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighlightSample {
    pub group: u32,
    pub inv_intensity: f64,
    pub chroma: [f64; 3],
}

/// Candidate pixels and their connected-blob grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct HighlightCandidates {
    pub width: usize,
    pub height: usize,
    /// blob id per pixel, `None` for non-candidates
    pub blob: Vec<Option<u32>>,
    pub samples: Vec<HighlightSample>,
}

impl HighlightCandidates {
    pub fn mask(&self) -> Vec<bool> {
        self.blob.iter().map(Option::is_some).collect()
    }
}

/// Bright, chromatically smooth pixels, grouped into 4-connected blobs.
pub fn highlight_candidates(img: &RgbImage, params: &IlluminantParams) -> HighlightCandidates {
    let (w, h) = (img.width(), img.height());
    let chroma = chromaticity(img);
    let sums: Vec<f64> = img.pixels().iter().map(|p| p[0] + p[1] + p[2]).collect();

    let mut lit: Vec<f64> = sums.iter().copied().filter(|&s| s >= S_MIN).collect();
    let mut blob = vec![None; w * h];
    if lit.is_empty() {
        return HighlightCandidates {
            width: w,
            height: h,
            blob,
            samples: Vec::new(),
        };
    }
    lit.sort_by(f64::total_cmp);
    let rank = ((lit.len() - 1) as f64 * params.brightness_percentile.clamp(0.0, 1.0)).round() as usize;
    let threshold = lit[rank];

    let gradient = |i: usize| -> f64 {
        let (u, v) = (i % w, i / w);
        let c = chroma.pixels[i].as_array();
        let mut g: f64 = 0.0;
        let mut visit = |j: usize| {
            let d = chroma.pixels[j].as_array();
            for k in 0..3 {
                g = g.max((c[k] - d[k]).abs());
            }
        };
        if u > 0 {
            visit(i - 1);
        }
        if u + 1 < w {
            visit(i + 1);
        }
        if v > 0 {
            visit(i - w);
        }
        if v + 1 < h {
            visit(i + w);
        }
        g
    };
    let candidate: Vec<bool> = (0..w * h)
        .map(|i| !chroma.black[i] && sums[i] > threshold && gradient(i) < params.max_chroma_gradient)
        .collect();

    let mut samples = Vec::new();
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !candidate[start] || blob[start].is_some() {
            continue;
        }
        blob[start] = Some(next);
        stack.push(start);
        while let Some(i) = stack.pop() {
            samples.push(HighlightSample {
                group: next,
                inv_intensity: 1.0 / sums[i],
                chroma: chroma.pixels[i].as_array(),
            });
            let (u, v) = (i % w, i / w);
            let mut push = |j: usize| {
                if candidate[j] && blob[j].is_none() {
                    blob[j] = Some(next);
                    stack.push(j);
                }
            };
            if u > 0 {
                push(i - 1);
            }
            if u + 1 < w {
                push(i + 1);
            }
            if v > 0 {
                push(i - w);
            }
            if v + 1 < h {
                push(i + w);
            }
        }
        next += 1;
    }
    HighlightCandidates {
        width: w,
        height: h,
        blob,
        samples,
    }
}

/// Illuminant chromaticity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlluminantEstimate {
    pub gamma: [f64; 3],
    /// Fraction of intercept votes agreeing with the winning bin; zero for
    /// the neutral fallback.
    pub confidence: f64,
    /// Set when there was not enough specular evidence and the neutral
    /// illuminant was returned instead.
    pub fallback: bool,
    /// Number of specular samples that voted.
    pub specular_samples: usize,
}

impl IlluminantEstimate {
    pub fn neutral() -> Self {
        Self {
            gamma: [NEUTRAL; 3],
            confidence: 0.0,
            fallback: true,
            specular_samples: 0,
        }
    }
}

/// Groups whose pixels drift linearly in IIC space, i.e. carry a specular
/// component. Returned sorted.
pub fn specular_groups(samples: &[HighlightSample], params: &IlluminantParams) -> Vec<u32> {
    let groups = sorted_groups(samples);
    groups
        .into_iter()
        .filter(|g| g.len() >= params.min_blob.max(2) && is_specular(g, params))
        .map(|g| g[0].group)
        .collect()
}

fn sorted_groups(samples: &[HighlightSample]) -> Vec<Vec<HighlightSample>> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| {
        a.group
            .cmp(&b.group)
            .then(a.inv_intensity.total_cmp(&b.inv_intensity))
            .then(a.chroma[0].total_cmp(&b.chroma[0]))
            .then(a.chroma[1].total_cmp(&b.chroma[1]))
            .then(a.chroma[2].total_cmp(&b.chroma[2]))
    });
    let mut out: Vec<Vec<HighlightSample>> = Vec::new();
    for s in sorted {
        match out.last_mut() {
            Some(g) if g[0].group == s.group => g.push(s),
            _ => out.push(vec![s]),
        }
    }
    out
}

fn is_specular(group: &[HighlightSample], params: &IlluminantParams) -> bool {
    let n = group.len() as f64;
    let mx = group.iter().map(|s| s.inv_intensity).sum::<f64>() / n;
    let sxx: f64 = group.iter().map(|s| (s.inv_intensity - mx).powi(2)).sum();
    if sxx <= 1e-18 {
        return false;
    }
    let (xmin, xmax) = group.iter().fold((f64::MAX, f64::MIN), |(lo, hi), s| {
        (lo.min(s.inv_intensity), hi.max(s.inv_intensity))
    });
    (0..3).any(|c| {
        let my = group.iter().map(|s| s.chroma[c]).sum::<f64>() / n;
        let (mut sxy, mut syy) = (0.0, 0.0);
        for s in group {
            let (dx, dy) = (s.inv_intensity - mx, s.chroma[c] - my);
            sxy += dx * dy;
            syy += dy * dy;
        }
        if syy <= 1e-18 {
            return false;
        }
        let corr = sxy / (sxx * syy).sqrt();
        let shift = (sxy / sxx).abs() * (xmax - xmin);
        corr.abs() >= params.min_correlation && shift >= params.min_chroma_shift
    })
}

/// Recovers the illuminant chromaticity as the common `1 / s -> 0`
/// intercept of specular pixel lines.
///
/// Within each specular blob, samples are ordered by `1 / s` and the
/// `i`-th is paired with the `i + n/2`-th; every pair with enough
/// separation votes its implied intercept into a histogram over `[0, 1]`.
/// The estimate is the mean of the votes in the modal bin, renormalised so
/// the three channels sum to one. The result depends only on the multiset
/// of samples, not their order.
pub fn estimate_illuminant(samples: &[HighlightSample], params: &IlluminantParams) -> IlluminantEstimate {
    let specular: Vec<u32> = specular_groups(samples, params);
    let groups: Vec<Vec<HighlightSample>> = sorted_groups(samples)
        .into_iter()
        .filter(|g| specular.binary_search(&g[0].group).is_ok())
        .collect();
    let count: usize = groups.iter().map(Vec::len).sum();
    if count < params.min_points {
        return IlluminantEstimate::neutral();
    }

    let bins = params.bins.max(1);
    let mut gamma = [0.0; 3];
    let mut confidence = 0.0;
    for (c, out) in gamma.iter_mut().enumerate() {
        let mut votes = Vec::new();
        for g in &groups {
            let half = g.len() / 2;
            for i in 0..half {
                let (a, b) = (&g[i], &g[i + half]);
                let dx = b.inv_intensity - a.inv_intensity;
                if dx.abs() < params.min_pair_dx {
                    continue;
                }
                let slope = (b.chroma[c] - a.chroma[c]) / dx;
                let intercept = a.chroma[c] - slope * a.inv_intensity;
                if (0.0..=1.0).contains(&intercept) {
                    votes.push(intercept);
                }
            }
        }
        if votes.len() < params.min_points / 2 {
            return IlluminantEstimate::neutral();
        }
        let bin_of = |x: f64| ((x * bins as f64) as usize).min(bins - 1);
        let mut hist = vec![0usize; bins];
        for &v in &votes {
            hist[bin_of(v)] += 1;
        }
        // first maximum wins ties
        let mode = hist
            .iter()
            .enumerate()
            .fold((0, 0), |best, (i, &n)| if n > best.1 { (i, n) } else { best })
            .0;
        let in_mode: Vec<f64> = votes.iter().copied().filter(|&v| bin_of(v) == mode).collect();
        *out = in_mode.iter().sum::<f64>() / in_mode.len() as f64;
        let near = votes.iter().filter(|&&v| bin_of(v).abs_diff(mode) <= 1).count();
        confidence += near as f64 / votes.len() as f64 / 3.0;
    }
    let total: f64 = gamma.iter().sum();
    if total <= 0.0 {
        return IlluminantEstimate::neutral();
    }
    IlluminantEstimate {
        gamma: gamma.map(|g| g / total),
        confidence,
        fallback: false,
        specular_samples: count,
    }
}

/// Candidate detection followed by [`estimate_illuminant`].
pub fn estimate_illuminant_from_image(img: &RgbImage, params: &IlluminantParams) -> IlluminantEstimate {
    estimate_illuminant(&highlight_candidates(img, params).samples, params)
}

/// Illumination-normalised two-channel feature image `(sigma_r, sigma_g)`.
///
/// Black pixels get the neutral chromaticity. When `est` carries specular
/// evidence, pixels of the specular blobs (dilated by one pixel) are
/// replaced by the median chromaticity of the non-specular pixels in their
/// 5x5 neighbourhood; the fill proceeds inwards pass by pass so blobs wider
/// than the window are fully covered. All other pixels pass through.
pub fn normalize_illumination(img: &RgbImage, est: &IlluminantEstimate, params: &IlluminantParams) -> FeatureImage {
    let (w, h) = (img.width(), img.height());
    let chroma = chromaticity(img);
    let mut feat: Vec<[f64; 2]> = chroma.pixels.iter().map(|c| [c.r, c.g]).collect();
    if est.fallback {
        return FeatureImage::new(w, h, feat);
    }

    let cands = highlight_candidates(img, params);
    let groups = specular_groups(&cands.samples, params);
    let core: Vec<bool> = cands
        .blob
        .iter()
        .map(|b| b.is_some_and(|g| groups.binary_search(&g).is_ok()))
        .collect();
    let mut pending: Vec<bool> = (0..w * h)
        .map(|i| {
            let (u, v) = (i % w, i / w);
            (v.saturating_sub(1)..(v + 2).min(h)).any(|y| (u.saturating_sub(1)..(u + 2).min(w)).any(|x| core[y * w + x]))
        })
        .collect();

    let mut remaining = pending.iter().filter(|&&p| p).count();
    while remaining > 0 {
        let mut updates = Vec::new();
        for i in 0..w * h {
            if !pending[i] {
                continue;
            }
            let (u, v) = (i % w, i / w);
            let mut rs = Vec::with_capacity(24);
            let mut gs = Vec::with_capacity(24);
            for y in v.saturating_sub(2)..(v + 3).min(h) {
                for x in u.saturating_sub(2)..(u + 3).min(w) {
                    let j = y * w + x;
                    if !pending[j] && !chroma.black[j] {
                        rs.push(feat[j][0]);
                        gs.push(feat[j][1]);
                    }
                }
            }
            if !rs.is_empty() {
                updates.push((i, [median_of(&mut rs), median_of(&mut gs)]));
            }
        }
        if updates.is_empty() {
            break;
        }
        remaining -= updates.len();
        for (i, f) in updates {
            feat[i] = f;
            pending[i] = false;
        }
    }
    FeatureImage::new(w, h, feat)
}

fn median_of(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Raw `(r, g)` intensities as features, bypassing chromaticity. Only
/// useful as an ablation baseline.
pub fn intensity_features(img: &RgbImage) -> FeatureImage {
    FeatureImage::new(img.width(), img.height(), img.pixels().iter().map(|p| [p[0], p[1]]).collect())
}
