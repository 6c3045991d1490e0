//! Goodness-of-view metrics.
//!
//! Four per-view scores, each normalised to [0, 1], computed over the object
//! mask of one RGB-D frame:
//!
//! * silhouette length: boundary pixels over the frame half-perimeter
//!   `2·(W + H)`;
//! * depth entropy: Shannon entropy of the masked depth histogram over the
//!   mask's own depth range;
//! * curvature entropy: entropy of a normal-deviation curvature proxy,
//!   histogrammed over its fixed range `[0, 0.2]`;
//! * colour entropy: entropy of an HSV histogram with `hue_bins` bins for
//!   chromatic pixels and `gray_bins` value bins for the rest.
//!
//! Entropies are divided by `log2(bin count)`. The combined score is the
//! weighted sum of the four.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::renderer::RgbdFrame;
use crate::segmenter::ObjectMask;
use crate::{Rgb, Vec3};

/// Curvature proxies are clamped to `[0, CURVATURE_CAP]`.
pub const CURVATURE_CAP: f64 = 0.2;
/// Masked depth ranges narrower than this (mm) score zero depth entropy.
pub const MIN_DEPTH_RANGE: f64 = 1.0;
/// HSV gate for chromatic pixels.
pub const CHROMA_MIN_SATURATION: f64 = 0.2;
pub const CHROMA_MIN_VALUE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GovError {
    #[error("gov.weights must be non-negative, got {0:?}")]
    NegativeWeight([f64; 4]),
    #[error("gov.weights must sum to 1 (within 1e-9), got {sum}")]
    WeightSum { sum: f64 },
}

/// Non-negative weights summing to one, in the order
/// silhouette, depth, curvature, colour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct GovWeights([f64; 4]);

impl GovWeights {
    pub fn new(silhouette: f64, depth: f64, curvature: f64, color: f64) -> Result<Self, GovError> {
        Self::try_from([silhouette, depth, curvature, color])
    }

    /// Rescale arbitrary non-negative weights to sum to one.
    pub fn normalized(raw: [f64; 4]) -> Result<Self, GovError> {
        let sum: f64 = raw.iter().sum();
        if raw.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(GovError::NegativeWeight(raw));
        }
        if sum <= 0.0 {
            return Err(GovError::WeightSum { sum });
        }
        Self::try_from(raw.map(|w| w / sum))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for GovWeights {
    fn default() -> Self {
        Self([0.25; 4])
    }
}

impl TryFrom<[f64; 4]> for GovWeights {
    type Error = GovError;

    fn try_from(w: [f64; 4]) -> Result<Self, GovError> {
        if w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(GovError::NegativeWeight(w));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GovError::WeightSum { sum });
        }
        Ok(Self(w))
    }
}

impl From<GovWeights> for [f64; 4] {
    fn from(w: GovWeights) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovConfig {
    pub weights: GovWeights,
    pub depth_bins: usize,
    pub curvature_bins: usize,
    pub hue_bins: usize,
    pub gray_bins: usize,
}

impl Default for GovConfig {
    fn default() -> Self {
        Self {
            weights: GovWeights::default(),
            depth_bins: 32,
            curvature_bins: 32,
            hue_bins: 30,
            gray_bins: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GovScore {
    pub silhouette: f64,
    pub depth_entropy: f64,
    pub curvature_entropy: f64,
    pub color_entropy: f64,
    pub combined: f64,
}

impl GovScore {
    pub fn components(&self) -> [f64; 4] {
        [
            self.silhouette,
            self.depth_entropy,
            self.curvature_entropy,
            self.color_entropy,
        ]
    }

    pub fn from_components(components: [f64; 4], weights: &GovWeights) -> Self {
        Self {
            silhouette: components[0],
            depth_entropy: components[1],
            curvature_entropy: components[2],
            color_entropy: components[3],
            combined: combined_gov(&components, weights),
        }
    }
}

/// Shannon entropy (bits) of a histogram divided by `log2(len)`.
pub fn normalized_entropy(hist: &[usize]) -> f64 {
    let total: usize = hist.iter().sum();
    if total == 0 || hist.len() < 2 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    (h / (hist.len() as f64).log2()).clamp(0.0, 1.0)
}

fn bin_of(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    (((x - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Boundary pixel count over `2·(width + height)`, clamped to 1.
pub fn silhouette_length(mask: &ObjectMask) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let norm = 2.0 * (mask.width() + mask.height()) as f64;
    (mask.boundary_count() as f64 / norm).min(1.0)
}

pub fn depth_entropy(frame: &RgbdFrame, mask: &ObjectMask, bins: usize) -> f64 {
    let depths: Vec<f64> = mask
        .indices()
        .filter(|&i| frame.is_valid(i))
        .map(|i| frame.depth[i])
        .collect();
    depth_values_entropy(&depths, bins)
}

/// Entropy of raw depth samples over their own range.
pub fn depth_values_entropy(depths: &[f64], bins: usize) -> f64 {
    let bins = bins.max(2);
    let (lo, hi) = depths
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    if depths.is_empty() || hi - lo < MIN_DEPTH_RANGE {
        return 0.0;
    }
    let mut hist = vec![0usize; bins];
    for &d in depths {
        hist[bin_of(d, lo, hi, bins)] += 1;
    }
    normalized_entropy(&hist)
}

/// Per-pixel surface normals over the mask from central differences of the
/// back-projected points (one-sided at the mask edge), facing the camera.
pub fn mask_normals(frame: &RgbdFrame, mask: &ObjectMask) -> Vec<Option<Vec3>> {
    let w = frame.width;
    let point = |x: isize, y: isize| -> Option<Vec3> {
        if x < 0 || y < 0 || x as usize >= w || y as usize >= frame.height {
            return None;
        }
        let (x, y) = (x as usize, y as usize);
        if !mask.get(x, y) {
            return None;
        }
        frame.point(y * w + x)
    };
    let diff = |a: Option<Vec3>, c: Option<Vec3>, b: Option<Vec3>| match (a, c, b) {
        (Some(a), _, Some(b)) => Some(b - a),
        (None, Some(c), Some(b)) => Some(b - c),
        (Some(a), Some(c), None) => Some(c - a),
        _ => None,
    };
    let mut normals = vec![None; frame.width * frame.height];
    for i in mask.indices() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let Some(p) = point(x, y) else { continue };
        let dx = diff(point(x - 1, y), Some(p), point(x + 1, y));
        let dy = diff(point(x, y - 1), Some(p), point(x, y + 1));
        if let (Some(dx), Some(dy)) = (dx, dy) {
            let n = dx.cross(&dy);
            let len = n.norm();
            if len > 1e-12 {
                let n = n / len;
                normals[i] = Some(if n.dot(&p) > 0.0 { -n } else { n });
            }
        }
    }
    normals
}

/// `1 − n · mean(neighbour normals)` clamped to `[0, CURVATURE_CAP]`, for
/// each mask pixel with a normal and at least one 4-neighbour normal.
pub fn curvature_proxies(frame: &RgbdFrame, mask: &ObjectMask) -> Vec<f64> {
    let normals = mask_normals(frame, mask);
    let (w, h) = (frame.width, frame.height);
    let mut out = Vec::new();
    for i in mask.indices() {
        let Some(n) = normals[i] else { continue };
        let (x, y) = (i % w, i / w);
        let mut sum = Vec3::zeros();
        let mut any = false;
        let mut add = |j: usize| {
            if let Some(m) = normals[j] {
                sum += m;
                any = true;
            }
        };
        if x > 0 {
            add(i - 1);
        }
        if x + 1 < w {
            add(i + 1);
        }
        if y > 0 {
            add(i - w);
        }
        if y + 1 < h {
            add(i + w);
        }
        let len = sum.norm();
        if any && len > 1e-12 {
            out.push((1.0 - n.dot(&(sum / len))).clamp(0.0, CURVATURE_CAP));
        }
    }
    out
}

pub fn curvature_entropy(frame: &RgbdFrame, mask: &ObjectMask, bins: usize) -> f64 {
    let bins = bins.max(2);
    let proxies = curvature_proxies(frame, mask);
    if proxies.is_empty() {
        return 0.0;
    }
    let mut hist = vec![0usize; bins];
    for c in proxies {
        hist[bin_of(c, 0.0, CURVATURE_CAP, bins)] += 1;
    }
    normalized_entropy(&hist)
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(c: Rgb) -> (f64, f64, f64) {
    let [r, g, b] = c.map(|x| x as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h.rem_euclid(360.0), s, max)
}

/// Index into the concatenated `[hue bins | gray bins]` histogram.
pub fn color_bin(c: Rgb, hue_bins: usize, gray_bins: usize) -> usize {
    let (h, s, v) = rgb_to_hsv(c);
    if s > CHROMA_MIN_SATURATION && v > CHROMA_MIN_VALUE {
        bin_of(h, 0.0, 360.0, hue_bins)
    } else {
        hue_bins + bin_of(v, 0.0, 1.0, gray_bins.max(1))
    }
}

pub fn color_histogram(frame: &RgbdFrame, mask: &ObjectMask, hue_bins: usize, gray_bins: usize) -> Vec<usize> {
    let mut hist = vec![0usize; hue_bins + gray_bins];
    for i in mask.indices() {
        hist[color_bin(frame.color[i], hue_bins, gray_bins)] += 1;
    }
    hist
}

pub fn color_entropy(frame: &RgbdFrame, mask: &ObjectMask, hue_bins: usize, gray_bins: usize) -> f64 {
    normalized_entropy(&color_histogram(frame, mask, hue_bins.max(2), gray_bins))
}

/// Weighted sum `Σ wᵢ·mᵢ`.
pub fn combined_gov(components: &[f64; 4], weights: &GovWeights) -> f64 {
    components
        .iter()
        .zip(weights.0.iter())
        .map(|(m, w)| m * w)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// All four metrics plus their combination; an empty mask scores zero.
pub fn evaluate_gov(frame: &RgbdFrame, mask: &ObjectMask, config: &GovConfig) -> GovScore {
    if mask.is_empty() {
        return GovScore::default();
    }
    GovScore::from_components(
        [
            silhouette_length(mask),
            depth_entropy(frame, mask, config.depth_bins),
            curvature_entropy(frame, mask, config.curvature_bins),
            color_entropy(frame, mask, config.hue_bins, config.gray_bins),
        ],
        &config.weights,
    )
}
