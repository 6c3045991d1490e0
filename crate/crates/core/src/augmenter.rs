//! Training-set expansion from captured views.
//!
//! A captured view becomes a square [`TrainingSample`] cropped around its
//! object mask. [`augment_2d`] produces rotated, scaled, mirrored and
//! re-backgrounded copies; [`augment_3d`] re-renders the scene from poses
//! jittered around the source viewpoint.

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{capture_pose, view_noise_seed, CameraConfig, Capture};
use crate::renderer::pnm::{encode_pbm, encode_ppm};
use crate::renderer::SceneSpec;
use crate::segmenter::{ObjectMask, SegmentationConfig};
use crate::viewsphere::{CameraPose, SphereError, ViewSphere, DEFAULT_UP};
use crate::{derive_seed, par, Rgb, Vec3};

/// Largest admissible 3D jitter cone half-angle (exclusive).
pub const MAX_JITTER: f64 = PI / 8.0;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("3D jitter must lie in [0, pi/8), got {0}")]
    JitterOutOfRange(f64),
    #[error("the capture contains no object")]
    NoObject,
    #[error("label must not be empty")]
    EmptyLabel,
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error("export failed: {0}")]
    Io(#[from] io::Error),
    #[error("manifest write failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_view: usize,
    pub transform: String,
}

/// Image and mask of equal size, labelled with the object name.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub image: Vec<Rgb>,
    pub mask: ObjectMask,
    pub label: String,
    pub provenance: Provenance,
}

impl TrainingSample {
    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }
}

/// Square crop centred on the mask centroid, large enough that the object
/// stays inside under any rotation and a 1.25x enlargement.
pub fn sample_from_capture(
    capture: &Capture,
    label: &str,
    source_view: usize,
    transform: impl Into<String>,
) -> Result<TrainingSample, AugmentError> {
    if label.is_empty() {
        return Err(AugmentError::EmptyLabel);
    }
    let mask = &capture.mask;
    let (mx, my) = mask.centroid().ok_or(AugmentError::NoObject)?;
    let (cx, cy) = (mx.round() as isize, my.round() as isize);
    let w = mask.width();
    let reach = mask
        .indices()
        .map(|i| {
            let (x, y) = ((i % w) as f64 - cx as f64, (i / w) as f64 - cy as f64);
            (x * x + y * y).sqrt()
        })
        .fold(0.0, f64::max);
    let half = (reach * 1.25).ceil() as isize + 2;
    let side = (2 * half + 1) as usize;
    let mut image = vec![[0u8; 3]; side * side];
    let mut bits = vec![false; side * side];
    for oy in 0..side {
        for ox in 0..side {
            let (sx, sy) = (cx - half + ox as isize, cy - half + oy as isize);
            if sx < 0 || sy < 0 || sx as usize >= w || sy as usize >= mask.height() {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            image[oy * side + ox] = capture.frame.color[sy * w + sx];
            bits[oy * side + ox] = mask.get(sx, sy);
        }
    }
    Ok(TrainingSample {
        image,
        mask: ObjectMask::from_bits(side, side, bits),
        label: label.to_string(),
        provenance: Provenance {
            source_view,
            transform: transform.into(),
        },
    })
}

/// What goes outside the mask of an augmented copy. Serialised as `keep`
/// or `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Background {
    /// Keep the (warped) source pixels.
    Keep,
    Color(Rgb),
}

impl std::fmt::Display for Background {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Background::Keep => f.write_str("keep"),
            Background::Color([r, g, b]) => write!(f, "#{r:02x}{g:02x}{b:02x}"),
        }
    }
}

impl TryFrom<String> for Background {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        if s == "keep" {
            return Ok(Background::Keep);
        }
        let hex = s
            .strip_prefix('#')
            .filter(|h| h.len() == 6 && h.is_ascii())
            .ok_or_else(|| format!("background must be `keep` or `#rrggbb`, got `{s}`"))?;
        let byte = |k: usize| u8::from_str_radix(&hex[k..k + 2], 16).map_err(|e| format!("bad colour `{s}`: {e}"));
        Ok(Background::Color([byte(0)?, byte(2)?, byte(4)?]))
    }
}

impl From<Background> for String {
    fn from(b: Background) -> Self {
        b.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augment2dParams {
    pub rotations_deg: Vec<f64>,
    pub scales: Vec<f64>,
    /// Each entry produces copies without (`false`) or with (`true`) a
    /// horizontal mirror.
    pub flips: Vec<bool>,
    pub backgrounds: Vec<Background>,
    /// Maximum seeded translation in pixels along each axis.
    pub translate_px: u32,
}

impl Default for Augment2dParams {
    fn default() -> Self {
        Self {
            rotations_deg: vec![0.0, 15.0, -15.0, 90.0],
            scales: vec![0.8, 1.0, 1.25],
            flips: vec![false, true],
            backgrounds: vec![Background::Color([32, 32, 32]), Background::Color([224, 224, 224])],
            translate_px: 2,
        }
    }
}

impl Augment2dParams {
    /// Parameters whose only output is the input itself.
    pub fn identity() -> Self {
        Self {
            rotations_deg: vec![0.0],
            scales: vec![1.0],
            flips: vec![false],
            backgrounds: vec![Background::Keep],
            translate_px: 0,
        }
    }

    pub fn output_count(&self) -> usize {
        self.rotations_deg.len() * self.scales.len() * self.flips.len() * self.backgrounds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Augment3dParams {
    /// Half-angle of the jitter cone in radians.
    pub jitter: f64,
    pub count: usize,
}

impl Default for Augment3dParams {
    fn default() -> Self {
        Self { jitter: 0.08, count: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub two_d: Augment2dParams,
    pub three_d: Augment3dParams,
}

/// `(cos, sin)` of an angle in degrees, exact at multiples of 90°.
fn cos_sin_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter.fract() == 0.0 {
        match (quarter as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let r = deg.to_radians();
        (r.cos(), r.sin())
    }
}

struct Warp {
    cos: f64,
    sin: f64,
    scale: f64,
    flip: bool,
    shift: (f64, f64),
    centre: (f64, f64),
}

impl Warp {
    /// Pre-image of output pixel `(x, y)`.
    fn source(&self, x: f64, y: f64) -> (f64, f64) {
        let qx = (x - self.centre.0 - self.shift.0) / self.scale;
        let qy = (y - self.centre.1 - self.shift.1) / self.scale;
        let rx = self.cos * qx + self.sin * qy;
        let ry = -self.sin * qx + self.cos * qy;
        let rx = if self.flip { -rx } else { rx };
        (rx + self.centre.0, ry + self.centre.1)
    }
}

fn bilinear(image: &[Rgb], w: usize, h: usize, x: f64, y: f64) -> Rgb {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let px = |xx: usize, yy: usize, c: usize| image[yy * w + xx][c] as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let top = px(x0, y0, c) * (1.0 - fx) + px(x1, y0, c) * fx;
        let bottom = px(x0, y1, c) * (1.0 - fx) + px(x1, y1, c) * fx;
        *o = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn warp_sample(s: &TrainingSample, warp: &Warp, background: Background, transform: String) -> TrainingSample {
    let (w, h) = (s.width(), s.height());
    let mut image = vec![[0u8; 3]; w * h];
    let mut bits = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = warp.source(x as f64, y as f64);
            let (nx, ny) = (sx.round(), sy.round());
            let inside = nx >= 0.0 && ny >= 0.0 && (nx as usize) < w && (ny as usize) < h;
            let on = inside && s.mask.get(nx as usize, ny as usize);
            bits[y * w + x] = on;
            image[y * w + x] = match background {
                Background::Color(c) if !on => c,
                _ => bilinear(&s.image, w, h, sx, sy),
            };
        }
    }
    TrainingSample {
        image,
        mask: ObjectMask::from_bits(w, h, bits),
        label: s.label.clone(),
        provenance: Provenance {
            source_view: s.provenance.source_view,
            transform,
        },
    }
}

/// One output per (rotation, scale, flip, background) combination, in that
/// nesting order, warped about the rounded mask centroid.
pub fn augment_2d(
    sample: &TrainingSample,
    params: &Augment2dParams,
    seed: u64,
) -> Result<Vec<TrainingSample>, AugmentError> {
    if let Some(&s) = params.scales.iter().find(|s| s.is_nan() || **s <= 0.0) {
        return Err(AugmentError::NonPositiveScale(s));
    }
    let (mx, my) = sample.mask.centroid().ok_or(AugmentError::NoObject)?;
    let centre = (mx.round(), my.round());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = params.translate_px as i64;
    let mut jobs = Vec::with_capacity(params.output_count());
    for &rot in &params.rotations_deg {
        for &scale in &params.scales {
            for &flip in &params.flips {
                for &bg in &params.backgrounds {
                    let shift = if t > 0 {
                        (rng.random_range(-t..=t) as f64, rng.random_range(-t..=t) as f64)
                    } else {
                        (0.0, 0.0)
                    };
                    jobs.push((rot, scale, flip, bg, shift));
                }
            }
        }
    }
    Ok(par::map(&jobs, |&(rot, scale, flip, bg, shift)| {
        let (cos, sin) = cos_sin_deg(rot);
        let warp = Warp {
            cos,
            sin,
            scale,
            flip,
            shift,
            centre,
        };
        let transform = format!(
            "rot={rot} scale={scale} flip={} bg={bg} dx={} dy={}",
            if flip { "h" } else { "none" },
            shift.0,
            shift.1
        );
        warp_sample(sample, &warp, bg, transform)
    }))
}

/// Result of [`augment_3d`].
#[derive(Debug, Clone, PartialEq)]
pub struct Augment3dOutput {
    pub samples: Vec<TrainingSample>,
    /// Viewing direction of every draw, including skipped ones.
    pub directions: Vec<Vec3>,
    /// Draws where segmentation found no object.
    pub shortfall: usize,
}

/// Unit vector drawn uniformly from the cone of half-angle `jitter` about `axis`.
fn cone_draw(axis: &Vec3, jitter: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    let (u, v): (f64, f64) = (rng.random(), rng.random());
    if jitter == 0.0 {
        return *axis;
    }
    let cos_t = 1.0 - u * (1.0 - jitter.cos());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * v;
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = axis.cross(&helper).normalize();
    let e2 = axis.cross(&e1);
    (axis * cos_t + (e1 * phi.cos() + e2 * phi.sin()) * sin_t).normalize()
}

/// Re-render `count` views from directions jittered around viewpoint `view`.
#[allow(clippy::too_many_arguments)]
pub fn augment_3d(
    scene: &SceneSpec,
    sphere: &ViewSphere,
    view: usize,
    camera: &CameraConfig,
    segmentation: &SegmentationConfig,
    params: &Augment3dParams,
    label: &str,
    seed: u64,
) -> Result<Augment3dOutput, AugmentError> {
    if !(0.0..MAX_JITTER).contains(&params.jitter) {
        return Err(AugmentError::JitterOutOfRange(params.jitter));
    }
    if label.is_empty() {
        return Err(AugmentError::EmptyLabel);
    }
    let axis = sphere.direction(view)?;
    let focus = scene.focus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<Vec3> = (0..params.count)
        .map(|_| cone_draw(&axis, params.jitter, &mut rng))
        .collect();
    let noise_seed = view_noise_seed(camera, view);
    let captured = par::map(&directions, |d| {
        let pose = CameraPose::look_at(focus + d * sphere.radius(), focus, DEFAULT_UP);
        capture_pose(scene, &pose, camera, segmentation, noise_seed)
    });
    let mut samples = Vec::new();
    for (k, (c, d)) in captured.iter().zip(&directions).enumerate() {
        if !c.has_object() {
            continue;
        }
        let angle = crate::viewsphere::angle_between(&axis, d);
        samples.push(sample_from_capture(
            c,
            label,
            view,
            format!("jitter3d draw={k} angle={angle:.6}"),
        )?);
    }
    let shortfall = params.count - samples.len();
    Ok(Augment3dOutput {
        samples,
        directions,
        shortfall,
    })
}

/// Full training set for one object: for every `(view, capture)` the base
/// crop, its 2D variations and the 3D re-renders. Per-view streams are
/// seeded from `(seed, view)` so a view's samples do not depend on which
/// other views were selected.
#[allow(clippy::too_many_arguments)]
pub fn build_training_set(
    scene: &SceneSpec,
    sphere: &ViewSphere,
    views: &[(usize, &Capture)],
    camera: &CameraConfig,
    segmentation: &SegmentationConfig,
    config: &AugmentConfig,
    label: &str,
    seed: u64,
) -> Result<Vec<TrainingSample>, AugmentError> {
    let mut out = Vec::new();
    for &(view, capture) in views {
        if !capture.has_object() {
            continue;
        }
        let base = sample_from_capture(capture, label, view, "base")?;
        out.extend(augment_2d(&base, &config.two_d, derive_seed(seed, 2 * view as u64))?);
        let three = augment_3d(
            scene,
            sphere,
            view,
            camera,
            segmentation,
            &config.three_d,
            label,
            derive_seed(seed, 2 * view as u64 + 1),
        )?;
        out.extend(three.samples);
    }
    Ok(out)
}

/// Write `sample_NNNNN.ppm` / `.pbm` pairs and `manifest.csv` with columns
/// `image,mask,label,source_view,transform`.
pub fn export_training_set(dir: &Path, samples: &[TrainingSample]) -> Result<(), AugmentError> {
    fs::create_dir_all(dir)?;
    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    manifest.write_record(["image", "mask", "label", "source_view", "transform"])?;
    for (i, s) in samples.iter().enumerate() {
        let image = format!("sample_{i:05}.ppm");
        let mask = format!("sample_{i:05}.pbm");
        fs::write(dir.join(&image), encode_ppm(s.width(), s.height(), &s.image))?;
        fs::write(dir.join(&mask), encode_pbm(s.width(), s.height(), s.mask.bits()))?;
        manifest.write_record([
            image.as_str(),
            mask.as_str(),
            s.label.as_str(),
            &s.provenance.source_view.to_string(),
            s.provenance.transform.as_str(),
        ])?;
    }
    manifest.flush()?;
    Ok(())
}
