//! Incremental instance detector.
//!
//! Every registered object keeps the feature vectors of its training samples
//! as exemplars. A segmented proposal is labelled with the object owning its
//! nearest exemplar, or [`UNKNOWN_LABEL`] when that exemplar is farther than
//! the registry's threshold. Registering an object only appends a model, so
//! previously registered objects are never touched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmenter::TrainingSample;
use crate::gov::color_bin;
use crate::par;
use crate::renderer::RgbdFrame;
use crate::segmenter::{extract_object_masks, BBox, ObjectMask, PlaneModel, SegmentationConfig};
use crate::Rgb;

pub const HUE_BINS: usize = 30;
pub const GRAY_BINS: usize = 8;
pub const HIST_DIM: usize = HUE_BINS + GRAY_BINS;
pub const HU_DIM: usize = 7;
pub const GEOM_DIM: usize = 3;
pub const FEATURE_DIM: usize = HIST_DIM + HU_DIM + GEOM_DIM;

/// Per-block multipliers applied to coordinate differences in [`distance`].
pub const HIST_WEIGHT: f64 = 1.0;
pub const HU_WEIGHT: f64 = 0.5;
pub const GEOM_WEIGHT: f64 = 1.0;

pub const UNKNOWN_LABEL: &str = "unknown";
pub const DEFAULT_UNKNOWN_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("cannot describe an empty mask")]
    EmptyMask,
    #[error("image has {pixels} pixels but the mask covers {expected}")]
    SizeMismatch { pixels: usize, expected: usize },
    #[error("feature vector must have {FEATURE_DIM} values, got {0}")]
    BadDimension(usize),
    #[error("object `{0}` is already registered")]
    Duplicate(String),
    #[error("object name must not be empty or `{UNKNOWN_LABEL}`")]
    BadName(String),
    #[error("registration of `{0}` needs at least one training sample")]
    NoSamples(String),
    #[error("I don't know the object `{0}`")]
    UnknownObject(String),
}

/// Colour histogram (38, L1-normalised), scaled Hu invariants (7) and
/// fill ratio, aspect ratio and compactness (3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn histogram(&self) -> &[f64] {
        &self.0[..HIST_DIM]
    }

    pub fn hu(&self) -> &[f64] {
        &self.0[HIST_DIM..HIST_DIM + HU_DIM]
    }

    pub fn geometry(&self) -> &[f64] {
        &self.0[HIST_DIM + HU_DIM..]
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = DetectError;

    fn try_from(v: Vec<f64>) -> Result<Self, DetectError> {
        if v.len() != FEATURE_DIM {
            return Err(DetectError::BadDimension(v.len()));
        }
        Ok(Self(v))
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.0
    }
}

/// The seven Hu moment invariants of a binary mask.
pub fn hu_moments(mask: &ObjectMask) -> [f64; 7] {
    let n = mask.pixel_count() as f64;
    let Some((cx, cy)) = mask.centroid() else {
        return [0.0; 7];
    };
    let w = mask.width();
    let (mut m20, mut m02, mut m11, mut m30, mut m03, mut m21, mut m12) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in mask.indices() {
        let x = (i % w) as f64 - cx;
        let y = (i / w) as f64 - cy;
        m20 += x * x;
        m02 += y * y;
        m11 += x * y;
        m30 += x * x * x;
        m03 += y * y * y;
        m21 += x * x * y;
        m12 += x * y * y;
    }
    let e2 = n.powi(2);
    let e3 = n.powf(2.5);
    let (n20, n02, n11) = (m20 / e2, m02 / e2, m11 / e2);
    let (n30, n03, n21, n12) = (m30 / e3, m03 / e3, m21 / e3, m12 / e3);
    let a = n30 + n12;
    let b = n21 + n03;
    let c = n30 - 3.0 * n12;
    let d = 3.0 * n21 - n03;
    [
        n20 + n02,
        (n20 - n02).powi(2) + 4.0 * n11 * n11,
        c * c + d * d,
        a * a + b * b,
        c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
        (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
        d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
    ]
}

/// Signed log compression of a Hu invariant into roughly [-1, 1].
pub fn scale_hu(h: f64) -> f64 {
    h.signum() * (1.0 + h.abs() * 1e4).log10() / 4.0
}

/// Descriptor of the masked region of `image` (same size as the mask).
pub fn extract_features(image: &[Rgb], mask: &ObjectMask) -> Result<FeatureVector, DetectError> {
    let expected = mask.width() * mask.height();
    if image.len() != expected {
        return Err(DetectError::SizeMismatch {
            pixels: image.len(),
            expected,
        });
    }
    let bbox = mask.bbox().ok_or(DetectError::EmptyMask)?;
    let n = mask.pixel_count() as f64;
    let mut v = vec![0.0; FEATURE_DIM];
    for i in mask.indices() {
        v[color_bin(image[i], HUE_BINS, GRAY_BINS)] += 1.0;
    }
    for x in &mut v[..HIST_DIM] {
        *x /= n;
    }
    for (k, h) in hu_moments(mask).into_iter().enumerate() {
        v[HIST_DIM + k] = scale_hu(h);
    }
    let (bw, bh) = (bbox.width() as f64, bbox.height() as f64);
    v[HIST_DIM + HU_DIM] = n / bbox.area() as f64;
    v[HIST_DIM + HU_DIM + 1] = bw.min(bh) / bw.max(bh);
    v[HIST_DIM + HU_DIM + 2] = (2.0 * (std::f64::consts::PI * n).sqrt() / mask.boundary_count() as f64).min(1.0);
    Ok(FeatureVector(v))
}

/// Block-weighted Euclidean distance.
pub fn distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
    let mut sum = 0.0;
    for (k, (x, y)) in a.0.iter().zip(&b.0).enumerate() {
        let w = if k < HIST_DIM {
            HIST_WEIGHT
        } else if k < HIST_DIM + HU_DIM {
            HU_WEIGHT
        } else {
            GEOM_WEIGHT
        };
        let d = (x - y) * w;
        sum += d * d;
    }
    sum.sqrt()
}

/// Strictly decreasing map from distance to (0, 1].
pub fn score_from_distance(d: f64) -> f64 {
    1.0 / (1.0 + d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub name: String,
    pub ordinal: u64,
    pub exemplars: Vec<FeatureVector>,
}

/// Outcome of labelling one feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// `None` when the nearest exemplar is beyond the unknown threshold or
    /// nothing is registered.
    pub label: Option<String>,
    pub nearest: Option<String>,
    pub distance: f64,
}

/// Something that can label feature vectors; the exemplar registry is the
/// built-in implementation and a learned detector can be substituted here.
pub trait DetectorBackend {
    fn classify(&self, features: &FeatureVector) -> Classification;
    fn knows(&self, name: &str) -> bool;
}

/// Append-only collection of object models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    models: Vec<ObjectModel>,
    unknown_threshold: f64,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new(DEFAULT_UNKNOWN_THRESHOLD)
    }
}

impl Registry {
    pub fn new(unknown_threshold: f64) -> Self {
        Self {
            models: Vec::new(),
            unknown_threshold,
        }
    }

    /// Rebuild from stored models; ordinals must be strictly increasing and
    /// names unique.
    pub fn from_models(unknown_threshold: f64, models: Vec<ObjectModel>) -> Result<Self, DetectError> {
        let mut r = Self::new(unknown_threshold);
        for m in models {
            if r.models.last().is_some_and(|l| l.ordinal >= m.ordinal) || r.knows(&m.name) {
                return Err(DetectError::Duplicate(m.name));
            }
            if m.exemplars.is_empty() {
                return Err(DetectError::NoSamples(m.name));
            }
            r.models.push(m);
        }
        Ok(r)
    }

    pub fn unknown_threshold(&self) -> f64 {
        self.unknown_threshold
    }

    pub fn models(&self) -> &[ObjectModel] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name.as_str()).collect()
    }

    pub fn model(&self, name: &str) -> Option<&ObjectModel> {
        self.models.iter().find(|m| m.name == name)
    }

    fn next_ordinal(&self) -> u64 {
        self.models.last().map_or(0, |m| m.ordinal + 1)
    }

    /// Add a model built from pre-computed features.
    pub fn register_features(
        &mut self,
        name: &str,
        exemplars: Vec<FeatureVector>,
    ) -> Result<&ObjectModel, DetectError> {
        if name.is_empty() || name == UNKNOWN_LABEL {
            return Err(DetectError::BadName(name.to_string()));
        }
        if self.knows(name) {
            return Err(DetectError::Duplicate(name.to_string()));
        }
        if exemplars.is_empty() {
            return Err(DetectError::NoSamples(name.to_string()));
        }
        let ordinal = self.next_ordinal();
        self.models.push(ObjectModel {
            name: name.to_string(),
            ordinal,
            exemplars,
        });
        Ok(self.models.last().expect("just pushed"))
    }

    /// Add a model whose exemplars are the samples' features.
    pub fn register_object(&mut self, name: &str, samples: &[TrainingSample]) -> Result<&ObjectModel, DetectError> {
        if self.knows(name) {
            return Err(DetectError::Duplicate(name.to_string()));
        }
        let features = sample_features(samples)?;
        self.register_features(name, features)
    }

    /// Append exemplars to an existing model (used when the same object is
    /// shown again, e.g. flipped over).
    pub fn append_exemplars(&mut self, name: &str, samples: &[TrainingSample]) -> Result<usize, DetectError> {
        let features = sample_features(samples)?;
        let model = self
            .models
            .iter_mut()
            .find(|m| m.name == name)
            .ok_or_else(|| DetectError::UnknownObject(name.to_string()))?;
        model.exemplars.extend(features);
        Ok(model.exemplars.len())
    }
}

fn sample_features(samples: &[TrainingSample]) -> Result<Vec<FeatureVector>, DetectError> {
    par::map(samples, |s| extract_features(&s.image, &s.mask))
        .into_iter()
        .collect()
}

impl DetectorBackend for Registry {
    fn classify(&self, features: &FeatureVector) -> Classification {
        let per_model = par::map(&self.models, |m| {
            m.exemplars
                .iter()
                .map(|e| distance(features, e))
                .fold(f64::INFINITY, f64::min)
        });
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in per_model.iter().enumerate() {
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) => {
                let name = self.models[i].name.clone();
                Classification {
                    label: (d <= self.unknown_threshold).then(|| name.clone()),
                    nearest: Some(name),
                    distance: d,
                }
            }
            None => Classification {
                label: None,
                nearest: None,
                distance: f64::INFINITY,
            },
        }
    }

    fn knows(&self, name: &str) -> bool {
        self.models.iter().any(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub score: f64,
    pub distance: f64,
    pub mask: ObjectMask,
}

/// Label one proposal mask of `frame`.
pub fn classify_mask<B: DetectorBackend>(backend: &B, frame: &RgbdFrame, mask: ObjectMask) -> Detection {
    let features = extract_features(&frame.color, &mask).expect("proposals are non-empty and frame-sized");
    let c = backend.classify(&features);
    Detection {
        label: c.label.unwrap_or_else(|| UNKNOWN_LABEL.to_string()),
        bbox: mask.bbox().expect("non-empty"),
        score: score_from_distance(c.distance),
        distance: c.distance,
        mask,
    }
}

/// Segment above-plane proposals and label each, largest proposal first.
pub fn detect<B: DetectorBackend>(
    backend: &B,
    frame: &RgbdFrame,
    plane: &PlaneModel,
    segmentation: &SegmentationConfig,
) -> Vec<Detection> {
    let masks = extract_object_masks(frame, plane, segmentation.min_height, segmentation.min_pixels);
    masks.into_iter().map(|m| classify_mask(backend, frame, m)).collect()
}

/// Best-scoring detection labelled `name`, if any.
pub fn query<B: DetectorBackend>(
    backend: &B,
    frame: &RgbdFrame,
    plane: &PlaneModel,
    segmentation: &SegmentationConfig,
    name: &str,
) -> Result<Option<Detection>, DetectError> {
    if !backend.knows(name) {
        return Err(DetectError::UnknownObject(name.to_string()));
    }
    let mut best: Option<Detection> = None;
    for d in detect(backend, frame, plane, segmentation) {
        if d.label == name && best.as_ref().is_none_or(|b| d.score > b.score) {
            best = Some(d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmenter::{build_training_set, AugmentConfig, Provenance};
    use crate::capture::{capture_view, CameraConfig};
    use crate::explorer::{explore, select_canonical, SceneEvaluator};
    use crate::gov::GovConfig;
    use crate::renderer::mesh::{make_box_with, make_cylinder_with, ColorScheme};
    use crate::renderer::{render_labeled, HitLabel, SceneSpec};
    use crate::viewsphere::ViewSphere;
    use proptest::prelude::*;

    fn ellipse(w: usize, h: usize, a: f64, b: f64, scale: usize) -> ObjectMask {
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        let base = |x: usize, y: usize| {
            let (dx, dy) = ((x as f64 - cx) / a, (y as f64 - cy) / b);
            dx * dx + dy * dy <= 1.0 || ((x as f64) > cx && (y as f64) < cy - b * 0.3 && (x as f64) < cx + a * 1.4)
        };
        ObjectMask::from_fn(w * scale, h * scale, |x, y| base(x / scale, y / scale))
    }

    #[test]
    fn red_object_fills_one_hue_bin() {
        let mask = ObjectMask::from_fn(20, 20, |x, y| (5..15).contains(&x) && (4..16).contains(&y));
        let f = extract_features(&vec![[220, 10, 10]; 400], &mask).unwrap();
        assert_eq!(f.values().len(), FEATURE_DIM);
        assert_eq!(f.histogram()[0], 1.0);
        assert!((f.histogram().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(f.geometry()[0], 1.0);
        assert!((f.geometry()[1] - 10.0 / 12.0).abs() < 1e-12);
        assert_eq!(f, extract_features(&vec![[220, 10, 10]; 400], &mask).unwrap());
        assert_eq!(
            extract_features(&[[0; 3]; 400], &ObjectMask::empty(20, 20)),
            Err(DetectError::EmptyMask)
        );
    }

    #[test]
    fn hu_is_scale_invariant() {
        let small = ellipse(60, 50, 14.0, 9.0, 1);
        let big = ellipse(60, 50, 14.0, 9.0, 2);
        let (a, b) = (hu_moments(&small), hu_moments(&big));
        for k in 0..7 {
            assert!((a[k] - b[k]).abs() < 1e-3, "hu{k}: {} vs {}", a[k], b[k]);
        }
        let fa = extract_features(&vec![[0; 3]; 3000], &small).unwrap();
        let fb = extract_features(&vec![[0; 3]; 12000], &big).unwrap();
        for (x, y) in fa.hu().iter().zip(fb.hu()) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    #[test]
    fn hu_of_a_disc_matches_the_continuous_value() {
        // Continuous disc: h1 = 1 / (2 pi), all others 0.
        let r = 40.0;
        let m = ObjectMask::from_fn(101, 101, |x, y| {
            let (dx, dy) = (x as f64 - 50.0, y as f64 - 50.0);
            dx * dx + dy * dy <= r * r
        });
        let h = hu_moments(&m);
        assert!((h[0] - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-3);
        assert!(h[1..].iter().all(|v| v.abs() < 1e-6));
    }

    fn sample_of(color: Rgb, mask: ObjectMask) -> TrainingSample {
        TrainingSample {
            image: vec![color; mask.width() * mask.height()],
            mask,
            label: "x".into(),
            provenance: Provenance {
                source_view: 0,
                transform: String::new(),
            },
        }
    }

    #[test]
    fn registration_rules() {
        let mut reg = Registry::default();
        let samples: Vec<TrainingSample> = (0..12)
            .map(|k| sample_of([200, 30, 30], ObjectMask::from_fn(30, 30, |x, y| x < 10 + k && y < 15)))
            .collect();
        assert_eq!(reg.register_object("a", &samples).unwrap().exemplars.len(), 12);
        let a_before = reg.model("a").unwrap().clone();
        reg.register_object("b", &samples[..3]).unwrap();
        assert_eq!(reg.model("a").unwrap(), &a_before);
        assert_eq!(reg.model("b").unwrap().ordinal, 1);
        assert_eq!(
            reg.register_object("a", &samples),
            Err(DetectError::Duplicate("a".into()))
        );
        assert_eq!(reg.register_object("c", &[]), Err(DetectError::NoSamples("c".into())));
        assert!(matches!(
            reg.register_object("unknown", &samples),
            Err(DetectError::BadName(_))
        ));
        assert_eq!(reg.append_exemplars("b", &samples[..2]).unwrap(), 5);
    }

    fn rig() -> (ViewSphere, CameraConfig, SegmentationConfig) {
        (
            ViewSphere::build(4, 350.0, -0.1).unwrap(),
            CameraConfig::default(),
            SegmentationConfig::default(),
        )
    }

    fn register_from_scene(reg: &mut Registry, name: &str, scene: &SceneSpec) {
        let (sphere, cam, seg) = rig();
        let eval = SceneEvaluator {
            scene,
            sphere: &sphere,
            camera: cam,
            segmentation: seg,
            gov: GovConfig::default(),
        };
        let state = explore(&sphere, eval, 8, 0).unwrap();
        let canon = select_canonical(&state, 3).unwrap();
        let views: Vec<(usize, &crate::capture::Capture)> = canon
            .views
            .iter()
            .map(|v| (v.index, v.capture.as_ref().unwrap()))
            .collect();
        let set = build_training_set(scene, &sphere, &views, &cam, &seg, &AugmentConfig::default(), name, 3).unwrap();
        reg.register_object(name, &set).unwrap();
    }

    fn cube() -> SceneSpec {
        SceneSpec::single(
            "cube",
            make_box_with([70.0; 3], &ColorScheme::from_hues(10.0, 40.0)).unwrap(),
        )
    }

    #[test]
    fn empty_registry_reports_unknown() {
        let (sphere, cam, seg) = rig();
        let c = capture_view(&cube(), &sphere, 0, &cam, &seg).unwrap();
        let dets = detect(&Registry::default(), &c.frame, &c.plane.unwrap(), &seg);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].label, UNKNOWN_LABEL);
        assert!(matches!(
            query(&Registry::default(), &c.frame, &c.plane.unwrap(), &seg, "cube"),
            Err(DetectError::UnknownObject(_))
        ));
    }

    #[test]
    fn closed_loop_recognises_registered_and_rejects_novel() {
        let (sphere, cam, seg) = rig();
        let mut reg = Registry::default();
        register_from_scene(&mut reg, "cube", &cube());

        let novel = make_cylinder_with(30.0, 60.0, 24, &ColorScheme::from_hues(200.0, 240.0)).unwrap();
        let cube_mesh = cube().objects[0].mesh.clone();
        let both = SceneSpec::arrangement(
            -35.0,
            vec![
                ("cube".into(), cube_mesh, [-60.0, 0.0], 0.0),
                ("novel".into(), novel, [60.0, 0.0], 0.0),
            ],
        );
        let pose = sphere.camera_pose_for(0, both.focus()).unwrap();
        let (frame, labels) = render_labeled(&both, &pose, &cam.intrinsics(), cam.width, cam.height);
        let (plane, _) = seg.segment(&frame).unwrap();
        let dets = detect(&reg, &frame, &plane, &seg);
        assert_eq!(dets.len(), 2);
        for d in &dets {
            // Ground truth: majority hit label under the proposal.
            let on_cube = d
                .mask
                .indices()
                .filter(|&i| labels.labels[i] == HitLabel::Object(0))
                .count();
            let truth = if 2 * on_cube > d.mask.pixel_count() {
                "cube"
            } else {
                UNKNOWN_LABEL
            };
            assert_eq!(d.label, truth, "distance {}", d.distance);
        }
        let q = query(&reg, &frame, &plane, &seg, "cube").unwrap().unwrap();
        assert_eq!(q.label, "cube");

        // Absent object: the cylinder alone.
        let only_novel = SceneSpec::single(
            "novel",
            make_cylinder_with(30.0, 60.0, 24, &ColorScheme::from_hues(200.0, 240.0)).unwrap(),
        );
        let c = capture_view(&only_novel, &sphere, 0, &cam, &seg).unwrap();
        assert_eq!(query(&reg, &c.frame, &c.plane.unwrap(), &seg, "cube").unwrap(), None);
    }

    fn concentrated(bins: &[usize], weights: &[f64], geo: f64) -> FeatureVector {
        let mut v = vec![0.0; FEATURE_DIM];
        let total: f64 = weights.iter().sum();
        for (b, w) in bins.iter().zip(weights) {
            v[*b] = w / total;
        }
        v[HIST_DIM] = 0.2 * geo;
        v[HIST_DIM + HU_DIM] = 0.5 + 0.3 * geo;
        FeatureVector::try_from(v).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn storage_order_does_not_change_labels(ws in proptest::collection::vec((0.1f64..1.0, 0.0f64..1.0), 2..12),
                                                probe in (0.1f64..1.0, 0.0f64..1.0), rot in 0usize..12) {
            let ex: Vec<FeatureVector> = ws.iter().map(|(w, g)| concentrated(&[0, 1], &[*w, 1.0 - *w + 0.01], *g)).collect();
            let mut a = Registry::new(10.0);
            a.register_features("a", ex.clone()).unwrap();
            a.register_features("b", ex.iter().rev().cloned().collect()).unwrap();
            let mut shuffled = ex.clone();
            shuffled.rotate_left(rot % ex.len());
            let mut b = Registry::new(10.0);
            b.register_features("a", shuffled.clone()).unwrap();
            b.register_features("b", shuffled).unwrap();
            let p = concentrated(&[0, 1], &[probe.0, 1.0 - probe.0], probe.1);
            // Identical exemplar sets: the earlier ordinal wins the tie.
            prop_assert_eq!(a.classify(&p).label, Some("a".to_string()));
            prop_assert_eq!(a.classify(&p), b.classify(&p));
        }

        #[test]
        fn hue_disjoint_registration_does_not_disturb_old_labels(
            old in proptest::collection::vec((0usize..10, 0.0f64..1.0), 2..6),
            new_bin in 15usize..30, probes in proptest::collection::vec((0usize..10, 0.0f64..1.0), 1..10)) {
            let mut reg = Registry::default();
            for (k, (bin, g)) in old.iter().enumerate() {
                let _ = reg.register_features(&format!("o{k}"), vec![concentrated(&[*bin], &[1.0], *g)]);
            }
            let probes: Vec<FeatureVector> = probes.iter().map(|(b, g)| concentrated(&[*b], &[1.0], *g)).collect();
            let before: Vec<Classification> = probes.iter().map(|p| reg.classify(p)).collect();
            let newcomer = concentrated(&[new_bin, new_bin + 1], &[0.5, 0.5], 0.5);
            reg.register_features("new", vec![newcomer.clone()]).unwrap();
            for (p, b) in probes.iter().zip(&before) {
                if b.distance < distance(p, &newcomer) {
                    prop_assert_eq!(&reg.classify(p), b);
                }
            }
        }

        #[test]
        fn score_decreases_with_distance(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            prop_assume!(a < b);
            prop_assert!(score_from_distance(a) > score_from_distance(b));
            prop_assert!(score_from_distance(a) <= 1.0 && score_from_distance(b) > 0.0);
        }
    }
}
