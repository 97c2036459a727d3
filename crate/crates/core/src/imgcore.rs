//! Image containers, binary PPM (P6) I/O and overlay drawing.
//!
//! Pixels are stored as linear RGB triples in `[0, 1]`. The ratio-based
//! chromaticity math downstream never has to care about the integer depth
//! of whatever file the image came from.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {got} pixels, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("channel value {value} at pixel {index} is outside [0, 1]")]
    ChannelOutOfRange { index: usize, value: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum PpmError {
    #[error("unsupported magic number {0:?}: only binary P6 is accepted")]
    UnsupportedMagic(String),
    #[error("malformed PPM header: {0}")]
    MalformedHeader(&'static str),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum AnnotateError {
    #[error("marker {index} at ({u}, {v}) lies outside the {width}x{height} image")]
    OutOfBounds {
        index: usize,
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },
}

/// Column/row address of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: usize,
    pub v: usize,
}

impl PixelCoord {
    pub const fn new(u: usize, v: usize) -> Self {
        Self { u, v }
    }
}

/// Row-major linear RGB image with every channel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::LengthMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        for (index, px) in data.iter().enumerate() {
            for &value in px {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ImageError::ChannelOutOfRange { index, value });
                }
            }
        }
        Ok(Self { width, height, data })
    }

    /// Uniform image. Channels are clamped into `[0, 1]`.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image by evaluating `f(u, v)` for every pixel; results are
    /// clamped into `[0, 1]` (NaN maps to 0).
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v).map(clamp_unit));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixel(&self, u: usize, v: usize) -> [f64; 3] {
        self.data[v * self.width + u]
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.u < self.width && p.v < self.height
    }

    fn set(&mut self, u: usize, v: usize, rgb: [f64; 3]) {
        self.data[v * self.width + u] = rgb;
    }
}

fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Two-channel real-valued grid, the input/output of the segmentation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 2]>,
}

impl FeatureImage {
    /// # Panics
    /// If `data.len() != width * height` or a dimension is zero.
    pub fn new(width: usize, height: usize, data: Vec<[f64; 2]>) -> Self {
        assert!(width > 0 && height > 0, "feature image dimensions must be non-zero");
        assert_eq!(data.len(), width * height, "feature buffer length mismatch");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 2]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f64; 2]] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> [f64; 2] {
        self.data[v * self.width + u]
    }
}

/// Parses a binary P6 PPM. Header comments (`#` to end of line) are
/// accepted; any maxval in `1..=65535` is accepted, samples wider than one
/// byte are big-endian.
pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, PpmError> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token().ok_or(PpmError::MalformedHeader("missing magic number"))?;
    if magic != b"P6" {
        return Err(PpmError::UnsupportedMagic(String::from_utf8_lossy(magic).into_owned()));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PpmError::MalformedHeader("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PpmError::MalformedHeader("maxval must be in 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(PpmError::MalformedHeader("missing whitespace after maxval")),
    }

    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3 * sample_bytes))
        .ok_or(PpmError::MalformedHeader("image dimensions overflow"))?;
    let raster = &bytes[cursor.pos..];
    if raster.len() < expected {
        return Err(PpmError::Truncated {
            expected,
            found: raster.len(),
        });
    }

    let scale = maxval as f64;
    let mut data = Vec::with_capacity(width * height);
    for px in raster[..expected].chunks_exact(3 * sample_bytes) {
        let mut rgb = [0.0; 3];
        for (c, out) in rgb.iter_mut().enumerate() {
            let raw = if sample_bytes == 1 {
                px[c] as usize
            } else {
                u16::from_be_bytes([px[2 * c], px[2 * c + 1]]) as usize
            };
            if raw > maxval {
                return Err(PpmError::MalformedHeader("sample exceeds maxval"));
            }
            *out = raw as f64 / scale;
        }
        data.push(rgb);
    }
    Ok(RgbImage { width, height, data })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &'static str) -> Result<usize, PpmError> {
        let tok = self.token().ok_or(PpmError::MalformedHeader(match what {
            "width" => "missing width",
            "height" => "missing height",
            _ => "missing maxval",
        }))?;
        if !tok.iter().all(u8::is_ascii_digit) || tok.len() > 9 {
            return Err(PpmError::MalformedHeader(match what {
                "width" => "width is not a decimal integer",
                "height" => "height is not a decimal integer",
                _ => "maxval is not a decimal integer",
            }));
        }
        Ok(tok.iter().fold(0usize, |acc, d| acc * 10 + (d - b'0') as usize))
    }
}

/// Serialises as `P6\n<w> <h>\n255\n` followed by 8-bit samples.
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len() * 3);
    out.extend_from_slice(header.as_bytes());
    for px in &img.data {
        for &c in px {
            out.push((c * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerShape {
    /// Filled disc, Euclidean radius.
    Disc,
    /// Plus sign with arms of length `radius`.
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerStyle {
    pub shape: MarkerShape,
    pub radius: usize,
    pub color: [f64; 3],
}

impl Default for MarkerStyle {
    fn default() -> Self {
        Self {
            shape: MarkerShape::Disc,
            radius: 3,
            color: [1.0, 0.0, 0.0],
        }
    }
}

/// Returns a copy of `img` with a marker drawn at every coordinate. Marker
/// footprints are clipped at the image border. Every pixel drawn lies within
/// Chebyshev distance `style.radius` of some marker.
pub fn annotate(img: &RgbImage, markers: &[PixelCoord], style: &MarkerStyle) -> Result<RgbImage, AnnotateError> {
    if let Some((index, m)) = markers.iter().enumerate().find(|(_, m)| !img.contains(**m)) {
        return Err(AnnotateError::OutOfBounds {
            index,
            u: m.u,
            v: m.v,
            width: img.width,
            height: img.height,
        });
    }
    let mut out = img.clone();
    let color = style.color.map(clamp_unit);
    let r = style.radius as isize;
    for m in markers {
        for dv in -r..=r {
            for du in -r..=r {
                let on = match style.shape {
                    MarkerShape::Disc => du * du + dv * dv <= r * r,
                    MarkerShape::Cross => du == 0 || dv == 0,
                };
                if !on {
                    continue;
                }
                let (u, v) = (m.u as isize + du, m.v as isize + dv);
                if u >= 0 && v >= 0 && (u as usize) < img.width && (v as usize) < img.height {
                    out.set(u as usize, v as usize, color);
                }
            }
        }
    }
    Ok(out)
}

/// Deterministic label colour: hue advances by the golden ratio conjugate
/// per label so neighbouring ids get well separated hues.
pub fn label_color(label: u32) -> [f64; 3] {
    const PHI_CONJ: f64 = 0.618_033_988_749_895;
    let hue = (label as f64 * PHI_CONJ).fract();
    hsv_to_rgb(hue, 0.65, 0.95)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h * 6.0;
    let sector = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Renders a dense label grid with [`label_color`].
///
/// # Panics
/// If `labels.len() != width * height`.
pub fn render_labels(labels: &[u32], width: usize, height: usize) -> RgbImage {
    assert_eq!(labels.len(), width * height, "label grid length mismatch");
    RgbImage::from_fn(width, height, |u, v| label_color(labels[v * width + u]))
}
