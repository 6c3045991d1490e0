//! Dominant-plane removal and per-object masks.
//!
//! The table is found by RANSAC over the back-projected cloud and refined
//! by a least-squares fit to its inliers. Pixels standing at least
//! `min_height` above it seed 4-connected components, which then grow
//! through lower pixels that still clear the table's noise band.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::renderer::{back_project, PointCloud, RgbdFrame};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("plane fitting needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error(
        "no dominant plane: best consensus {inliers} of {total} points is below the required fraction {min_fraction}"
    )]
    NoDominantPlane {
        inliers: usize,
        total: usize,
        min_fraction: f64,
    },
    #[error("no object found")]
    NoObject,
}

/// Plane `normal · x = offset` in the camera frame, oriented so the camera
/// centre lies on the positive side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_count: usize,
}

impl PlaneModel {
    /// Height of `p` above the plane (positive towards the camera).
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn through(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len < 1e-9 {
            return None;
        }
        Some(Self::oriented(n / len, a))
    }

    fn oriented(normal: Vec3, on_plane: &Vec3) -> Self {
        let mut normal = normal;
        let mut offset = normal.dot(on_plane);
        if offset > 0.0 {
            normal = -normal;
            offset = -offset;
        }
        Self {
            normal,
            offset,
            inlier_count: 0,
        }
    }

    fn count_inliers(&self, cloud: &PointCloud, threshold: f64) -> usize {
        cloud
            .points
            .iter()
            .filter(|p| self.signed_distance(&p.position).abs() <= threshold)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iterations: usize,
    /// mm
    pub inlier_threshold: f64,
    /// Minimum share of the cloud the best plane must explain.
    pub min_inlier_fraction: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 3.0,
            min_inlier_fraction: 0.2,
        }
    }
}

/// Best-consensus plane, refined by least squares over its inliers.
pub fn fit_dominant_plane(cloud: &PointCloud, params: &RansacParams, seed: u64) -> Result<PlaneModel, SegmentError> {
    let n = cloud.len();
    if n < 3 {
        return Err(SegmentError::TooFewPoints(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<[usize; 3]> = (0..params.iterations.max(1))
        .map(|_| {
            let s = sample(&mut rng, n, 3);
            [s.index(0), s.index(1), s.index(2)]
        })
        .collect();

    let scored = par::map(&draws, |&[a, b, c]| {
        let pts = &cloud.points;
        PlaneModel::through(&pts[a].position, &pts[b].position, &pts[c].position)
            .map(|p| (p.count_inliers(cloud, params.inlier_threshold), p))
    });
    // Highest count wins; earliest draw on ties.
    let mut best: Option<(usize, PlaneModel)> = None;
    for (count, plane) in scored.into_iter().flatten() {
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            best = Some((count, plane));
        }
    }
    let (count, hypothesis) = best.unwrap_or((
        0,
        PlaneModel {
            normal: Vec3::z(),
            offset: 0.0,
            inlier_count: 0,
        },
    ));
    if (count as f64) < params.min_inlier_fraction * n as f64 || count < 3 {
        return Err(SegmentError::NoDominantPlane {
            inliers: count,
            total: n,
            min_fraction: params.min_inlier_fraction,
        });
    }

    let inliers: Vec<Vec3> = cloud
        .points
        .iter()
        .map(|p| p.position)
        .filter(|p| hypothesis.signed_distance(p).abs() <= params.inlier_threshold)
        .collect();
    let mut refined = least_squares_plane(&inliers).unwrap_or(hypothesis);
    refined.inlier_count = refined.count_inliers(cloud, params.inlier_threshold);
    if refined.inlier_count < count {
        // Refinement drifted (pathological inlier set); keep the hypothesis.
        let mut h = hypothesis;
        h.inlier_count = count;
        return Ok(h);
    }
    Ok(refined)
}

/// Total-least-squares plane through `points`.
pub fn least_squares_plane(points: &[Vec3]) -> Option<PlaneModel> {
    if points.len() < 3 {
        return None;
    }
    let centroid = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (k, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal = eig.eigenvectors.column(k).into_owned().normalize();
    Some(PlaneModel::oriented(normal, &centroid))
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn intersects(&self, o: &BBox) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    pub fn iou(&self, o: &BBox) -> f64 {
        if !self.intersects(o) {
            return 0.0;
        }
        let inter = BBox {
            x0: self.x0.max(o.x0),
            y0: self.y0.max(o.y0),
            x1: self.x1.min(o.x1),
            y1: self.y1.min(o.y1),
        }
        .area();
        inter as f64 / (self.area() + o.area() - inter) as f64
    }
}

/// Binary region mask over a `width × height` image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    bbox: Option<BBox>,
    pixel_count: usize,
}

impl ObjectMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
            bbox: None,
            pixel_count: 0,
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask size mismatch");
        let mut bbox: Option<BBox> = None;
        let mut count = 0;
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = (i % width, i / width);
            count += 1;
            bbox = Some(match bbox {
                None => BBox {
                    x0: x,
                    y0: y,
                    x1: x,
                    y1: y,
                },
                Some(b) => BBox {
                    x0: b.x0.min(x),
                    y0: b.y0.min(y),
                    x1: b.x1.max(x),
                    y1: b.y1.max(y),
                },
            });
        }
        Self {
            width,
            height,
            bits,
            bbox,
            pixel_count: count,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::from_bits(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Tight bounds; `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    pub fn pixel_count(&self) -> usize {
        self.pixel_count
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_count == 0
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    /// Linear indices of set pixels, scanline order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in self.indices() {
            sx += (i % self.width) as f64;
            sy += (i / self.width) as f64;
        }
        let n = self.pixel_count as f64;
        Some((sx / n, sy / n))
    }

    /// Whether pixel `(x, y)` is set and has a 4-neighbour outside the mask
    /// or on the image border.
    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        if !self.get(x, y) {
            return false;
        }
        x == 0
            || y == 0
            || x + 1 == self.width
            || y + 1 == self.height
            || !self.get(x - 1, y)
            || !self.get(x + 1, y)
            || !self.get(x, y - 1)
            || !self.get(x, y + 1)
    }

    pub fn boundary_count(&self) -> usize {
        self.indices()
            .filter(|&i| self.is_boundary(i % self.width, i / self.width))
            .count()
    }

    pub fn iou_bits(&self, other: &[bool]) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.bits.iter().zip(other) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Floor of the growth threshold, in mm, for noise-free frames.
pub const GROW_FLOOR: f64 = 0.05;

/// Height above which a pixel may join a region seeded elsewhere: three
/// robust standard deviations of the near-table residuals, at least
/// [`GROW_FLOOR`] and at most `min_height`.
pub fn grow_threshold(heights: &[Option<f64>], min_height: f64) -> f64 {
    let mut band: Vec<f64> = heights
        .iter()
        .flatten()
        .filter(|d| d.abs() < min_height)
        .copied()
        .collect();
    if band.is_empty() {
        return min_height;
    }
    let mid = band.len() / 2;
    let median = *band.select_nth_unstable_by(mid, f64::total_cmp).1;
    let mut dev: Vec<f64> = band.iter().map(|d| (d - median).abs()).collect();
    let mad = *dev.select_nth_unstable_by(mid, f64::total_cmp).1;
    (median + 3.0 * 1.4826 * mad).max(GROW_FLOOR).min(min_height)
}

/// Above-plane connected regions of `frame`, largest first. Regions are
/// seeded by pixels at least `min_height` above the plane and grown
/// (hysteresis) through connected pixels above [`grow_threshold`], so object
/// pixels close to the table are kept.
pub fn extract_object_masks(
    frame: &RgbdFrame,
    plane: &PlaneModel,
    min_height: f64,
    min_pixels: usize,
) -> Vec<ObjectMask> {
    let (w, h) = (frame.width, frame.height);
    let heights: Vec<Option<f64>> = (0..w * h)
        .map(|i| frame.point(i).map(|p| plane.signed_distance(&p)))
        .collect();
    let low = grow_threshold(&heights, min_height);
    let seed = |i: usize| heights[i].is_some_and(|d| d >= min_height);
    let candidate: Vec<bool> = heights.iter().map(|d| d.is_some_and(|d| d >= low)).collect();

    let mut seen = vec![false; w * h];
    let mut masks = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !seed(start) || seen[start] {
            continue;
        }
        let mut bits = vec![false; w * h];
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            bits[i] = true;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if candidate[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        let mask = ObjectMask::from_bits(w, h, bits);
        if mask.pixel_count() >= min_pixels {
            masks.push(mask);
        }
    }
    // Stable: equal sizes keep scanline order.
    masks.sort_by_key(|m| std::cmp::Reverse(m.pixel_count()));
    masks
}

/// Largest mask; ties go to the earlier (scanline-first) component.
pub fn primary_mask(masks: &[ObjectMask]) -> Result<&ObjectMask, SegmentError> {
    let mut best: Option<&ObjectMask> = None;
    for m in masks {
        if best.is_none_or(|b| m.pixel_count() > b.pixel_count()) {
            best = Some(m);
        }
    }
    best.ok_or(SegmentError::NoObject)
}

/// Tunables for the plane-removal pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    pub ransac_iterations: usize,
    pub inlier_threshold: f64,
    pub min_inlier_fraction: f64,
    pub min_height: f64,
    pub min_pixels: usize,
    pub seed: u64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        let r = RansacParams::default();
        Self {
            ransac_iterations: r.iterations,
            inlier_threshold: r.inlier_threshold,
            min_inlier_fraction: r.min_inlier_fraction,
            min_height: 5.0,
            min_pixels: 30,
            seed: 0,
        }
    }
}

impl SegmentationConfig {
    pub fn ransac(&self) -> RansacParams {
        RansacParams {
            iterations: self.ransac_iterations,
            inlier_threshold: self.inlier_threshold,
            min_inlier_fraction: self.min_inlier_fraction,
        }
    }

    /// Fit the table and extract object masks from one frame.
    pub fn segment(&self, frame: &RgbdFrame) -> Result<(PlaneModel, Vec<ObjectMask>), SegmentError> {
        let cloud = back_project(frame);
        let plane = fit_dominant_plane(&cloud, &self.ransac(), self.seed)?;
        let masks = extract_object_masks(frame, &plane, self.min_height, self.min_pixels);
        Ok((plane, masks))
    }
}
