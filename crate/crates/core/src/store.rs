//! Configuration, registry and scene files.
//!
//! Every format is line-oriented text whose first line is a magic word and a
//! format version. See `docs/formats.md` for the field-by-field layout.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmenter::{AugmentConfig, MAX_JITTER};
use crate::capture::CameraConfig;
use crate::detector::{FeatureVector, ObjectModel, Registry, DEFAULT_UNKNOWN_THRESHOLD, FEATURE_DIM};
use crate::gov::GovConfig;
use crate::renderer::{Face, Lighting, Mesh, Pose, SceneObject, SceneSpec, Table};
use crate::segmenter::SegmentationConfig;
use crate::viewsphere::{SphereError, ViewSphere};
use crate::Vec3;

pub const CONFIG_MAGIC: &str = "# canonview-config";
pub const CONFIG_VERSION: u32 = 1;
pub const REGISTRY_MAGIC: &str = "canonview-registry";
pub const REGISTRY_VERSION: u32 = 1;
pub const SCENE_MAGIC: &str = "canonview-scene";
pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("file not found: {}", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unsupported {kind} version {found} (this build reads version {supported})")]
    VersionMismatch {
        kind: &'static str,
        found: String,
        supported: u32,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{field} out of range: {bound}")]
    OutOfRange { field: &'static str, bound: String },
}

fn read_text(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            StoreError::Missing(path.to_path_buf())
        } else {
            StoreError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), StoreError> {
    // Write to a sibling temp file and rename so readers never see a partial file.
    let tmp = path.with_extension("tmp~");
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    pub frequency: u32,
    pub radius: f64,
    pub cutoff: f64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            frequency: 4,
            radius: 350.0,
            cutoff: -0.1,
        }
    }
}

impl SphereConfig {
    pub fn build(&self) -> Result<ViewSphere, SphereError> {
        ViewSphere::build(self.frequency, self.radius, self.cutoff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorerConfig {
    pub budget: usize,
    pub canonical_k: usize,
    pub start_view: usize,
    /// Seed for augmentation streams.
    pub seed: u64,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        Self {
            budget: 12,
            canonical_k: 5,
            start_view: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub unknown_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            unknown_threshold: DEFAULT_UNKNOWN_THRESHOLD,
        }
    }
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sphere: SphereConfig,
    pub camera: CameraConfig,
    pub segmentation: SegmentationConfig,
    pub gov: GovConfig,
    pub explorer: ExplorerConfig,
    pub augment: AugmentConfig,
    pub detector: DetectorConfig,
}

fn check(ok: bool, field: &'static str, bound: &str) -> Result<(), StoreError> {
    if ok {
        Ok(())
    } else {
        Err(StoreError::OutOfRange {
            field,
            bound: bound.to_string(),
        })
    }
}

impl Config {
    /// Check every value against its documented range.
    pub fn validate(&self) -> Result<(), StoreError> {
        let s = &self.sphere;
        check((1..=32).contains(&s.frequency), "sphere.frequency", "must be in 1..=32")?;
        check(s.radius > 0.0 && s.radius.is_finite(), "sphere.radius", "must be > 0")?;
        check((-1.0..=1.0).contains(&s.cutoff), "sphere.cutoff", "must be in [-1, 1]")?;
        let c = &self.camera;
        check((8..=4096).contains(&c.width), "camera.width", "must be in 8..=4096")?;
        check((8..=4096).contains(&c.height), "camera.height", "must be in 8..=4096")?;
        check(c.focal > 0.0 && c.focal.is_finite(), "camera.focal", "must be > 0")?;
        check(
            c.noise_sigma >= 0.0 && c.noise_sigma.is_finite(),
            "camera.noise_sigma",
            "must be >= 0",
        )?;
        let g = &self.segmentation;
        check(
            g.ransac_iterations >= 1,
            "segmentation.ransac_iterations",
            "must be >= 1",
        )?;
        check(g.inlier_threshold > 0.0, "segmentation.inlier_threshold", "must be > 0")?;
        check(
            g.min_inlier_fraction > 0.0 && g.min_inlier_fraction <= 1.0,
            "segmentation.min_inlier_fraction",
            "must be in (0, 1]",
        )?;
        check(g.min_height >= 0.0, "segmentation.min_height", "must be >= 0")?;
        check(g.min_pixels >= 1, "segmentation.min_pixels", "must be >= 1")?;
        let v = &self.gov;
        check(v.depth_bins >= 2, "gov.depth_bins", "must be >= 2")?;
        check(v.curvature_bins >= 2, "gov.curvature_bins", "must be >= 2")?;
        check(v.hue_bins >= 2, "gov.hue_bins", "must be >= 2")?;
        check(v.gray_bins >= 1, "gov.gray_bins", "must be >= 1")?;
        let e = &self.explorer;
        check(e.budget >= 1, "explorer.budget", "must be >= 1")?;
        check(e.canonical_k >= 1, "explorer.canonical_k", "must be >= 1")?;
        let a = &self.augment;
        check(
            !a.two_d.rotations_deg.is_empty(),
            "augment.two_d.rotations_deg",
            "must not be empty",
        )?;
        check(
            a.two_d.rotations_deg.iter().all(|r| r.is_finite()),
            "augment.two_d.rotations_deg",
            "must be finite",
        )?;
        check(!a.two_d.scales.is_empty(), "augment.two_d.scales", "must not be empty")?;
        check(
            a.two_d.scales.iter().all(|s| *s > 0.0 && s.is_finite()),
            "augment.two_d.scales",
            "must be > 0",
        )?;
        check(!a.two_d.flips.is_empty(), "augment.two_d.flips", "must not be empty")?;
        check(
            !a.two_d.backgrounds.is_empty(),
            "augment.two_d.backgrounds",
            "must not be empty",
        )?;
        check(
            (0.0..MAX_JITTER).contains(&a.three_d.jitter),
            "augment.three_d.jitter",
            "must be in [0, pi/8)",
        )?;
        check(a.three_d.count <= 64, "augment.three_d.count", "must be <= 64")?;
        check(
            self.detector.unknown_threshold > 0.0,
            "detector.unknown_threshold",
            "must be > 0",
        )?;
        let sphere = s.build().map_err(|e| StoreError::Config(e.to_string()))?;
        check(
            e.start_view < sphere.len(),
            "explorer.start_view",
            "must index a viewpoint",
        )?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let body = toml::to_string(self).expect("config serialises");
        format!("{CONFIG_MAGIC} {CONFIG_VERSION}\n{body}")
    }

    pub fn from_text(text: &str) -> Result<Self, StoreError> {
        let first = text.lines().next().unwrap_or("");
        let version = first
            .strip_prefix(CONFIG_MAGIC)
            .map(str::trim)
            .ok_or(StoreError::Corrupt {
                line: 1,
                message: format!("expected header `{CONFIG_MAGIC} {CONFIG_VERSION}`"),
            })?;
        if version != CONFIG_VERSION.to_string() {
            return Err(StoreError::VersionMismatch {
                kind: "config",
                found: version.to_string(),
                supported: CONFIG_VERSION,
            });
        }
        let config: Config = toml::from_str(text).map_err(|e| StoreError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

pub fn load_config(path: &Path) -> Result<Config, StoreError> {
    Config::from_text(&read_text(path)?)
}

pub fn save_config(config: &Config, path: &Path) -> Result<(), StoreError> {
    config.validate()?;
    write_text(path, &config.to_text())
}

// -------------------------------------------------------------- registry

fn corrupt(line: usize, message: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        line,
        message: message.into(),
    }
}

/// Line cursor with 1-based line numbers.
struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
    skip_comments: bool,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, skip_comments: bool) -> Self {
        Self {
            iter: text.lines().enumerate(),
            last: 0,
            skip_comments,
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str), StoreError> {
        loop {
            match self.iter.next() {
                Some((i, l)) => {
                    self.last = i + 1;
                    if self.skip_comments && (l.trim().is_empty() || l.trim_start().starts_with('#')) {
                        continue;
                    }
                    return Ok((i + 1, l));
                }
                None => return Err(corrupt(self.last + 1, "unexpected end of file")),
            }
        }
    }

    fn rest_is_empty(&mut self) -> Option<usize> {
        for (i, l) in self.iter.by_ref() {
            if !(l.trim().is_empty() || (self.skip_comments && l.trim_start().starts_with('#'))) {
                return Some(i + 1);
            }
        }
        None
    }
}

fn header(lines: &mut Lines, magic: &str, version: u32, kind: &'static str) -> Result<(), StoreError> {
    let (n, l) = lines.next().map_err(|_| corrupt(1, "empty file"))?;
    let found = l
        .strip_prefix(magic)
        .map(str::trim)
        .ok_or_else(|| corrupt(n, format!("expected header `{magic} {version}`")))?;
    if found != version.to_string() {
        return Err(StoreError::VersionMismatch {
            kind,
            found: found.to_string(),
            supported: version,
        });
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, StoreError> {
    let tok = tok.ok_or_else(|| corrupt(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| corrupt(line, format!("bad {what} `{tok}`")))
}

fn keyword<'a>(line: &'a str, n: usize, word: &str) -> Result<&'a str, StoreError> {
    line.strip_prefix(word)
        .and_then(|r| if r.is_empty() { Some(r) } else { r.strip_prefix(' ') })
        .ok_or_else(|| corrupt(n, format!("expected `{word}`")))
}

fn push_floats(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("writing to a String");
    }
    out.push('\n');
}

/// Text form of a registry; loading and re-saving is byte-identical.
pub fn registry_to_text(registry: &Registry) -> String {
    let mut out = format!("{REGISTRY_MAGIC} {REGISTRY_VERSION}\n");
    writeln!(out, "threshold {:?}", registry.unknown_threshold()).unwrap();
    writeln!(out, "models {}", registry.len()).unwrap();
    for m in registry.models() {
        out.push_str(&model_to_text(m));
    }
    out.push_str("end\n");
    out
}

/// The lines of one model block.
pub fn model_to_text(m: &ObjectModel) -> String {
    let mut out = format!("model {} {} {}\n", m.ordinal, m.exemplars.len(), m.name);
    for e in &m.exemplars {
        push_floats(&mut out, e.values());
    }
    out
}

pub fn registry_from_text(text: &str) -> Result<Registry, StoreError> {
    let mut lines = Lines::new(text, false);
    header(&mut lines, REGISTRY_MAGIC, REGISTRY_VERSION, "registry")?;
    let (n, l) = lines.next()?;
    let threshold: f64 = parse_num(Some(keyword(l, n, "threshold")?), n, "threshold")?;
    let (n, l) = lines.next()?;
    let count: usize = parse_num(Some(keyword(l, n, "models")?), n, "model count")?;
    let mut models = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, l) = lines.next()?;
        let mut parts = keyword(l, n, "model")?.splitn(3, ' ');
        let ordinal: u64 = parse_num(parts.next(), n, "ordinal")?;
        let rows: usize = parse_num(parts.next(), n, "exemplar count")?;
        let name = parts
            .next()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| corrupt(n, "missing name"))?;
        let mut exemplars = Vec::with_capacity(rows);
        for _ in 0..rows {
            let (n, l) = lines.next()?;
            let values: Vec<f64> = l
                .split(' ')
                .map(|t| parse_num(Some(t), n, "feature value"))
                .collect::<Result<_, _>>()?;
            if values.len() != FEATURE_DIM {
                return Err(corrupt(
                    n,
                    format!("expected {FEATURE_DIM} values, got {}", values.len()),
                ));
            }
            exemplars.push(FeatureVector::try_from(values).expect("length checked"));
        }
        models.push(ObjectModel {
            name: name.to_string(),
            ordinal,
            exemplars,
        });
    }
    let (n, l) = lines.next()?;
    if l != "end" {
        return Err(corrupt(n, "expected `end`"));
    }
    if let Some(n) = lines.rest_is_empty() {
        return Err(corrupt(n, "content after `end`"));
    }
    Registry::from_models(threshold, models).map_err(|e| corrupt(n, e.to_string()))
}

pub fn save_registry(registry: &Registry, path: &Path) -> Result<(), StoreError> {
    write_text(path, &registry_to_text(registry))
}

pub fn load_registry(path: &Path) -> Result<Registry, StoreError> {
    registry_from_text(&read_text(path)?)
}

// ----------------------------------------------------------------- scene

pub fn scene_to_text(scene: &SceneSpec) -> String {
    let mut out = format!("{SCENE_MAGIC} {SCENE_VERSION}\n");
    writeln!(out, "# faces: {}", scene.triangle_count()).unwrap();
    if let Some(t) = &scene.table {
        out.push_str("table ");
        let [r, g, b] = t.color;
        push_floats(
            &mut out,
            &[
                t.point.x, t.point.y, t.point.z, t.normal.x, t.normal.y, t.normal.z, t.extent, r as f64, g as f64,
                b as f64,
            ],
        );
    }
    let l = &scene.lighting;
    out.push_str("light ");
    push_floats(
        &mut out,
        &[l.ambient, l.diffuse, l.direction.x, l.direction.y, l.direction.z],
    );
    for o in &scene.objects {
        writeln!(out, "object {}", o.name).unwrap();
        let (t, q) = (o.pose.translation, o.pose.rotation.quaternion());
        out.push_str("pose ");
        push_floats(&mut out, &[t.x, t.y, t.z, q.w, q.i, q.j, q.k]);
        for v in &o.mesh.vertices {
            out.push_str("v ");
            push_floats(&mut out, &[v.x, v.y, v.z]);
        }
        for f in &o.mesh.faces {
            let [i, j, k] = f.indices;
            let [r, g, b] = f.color;
            writeln!(out, "f {i} {j} {k} {r} {g} {b}").unwrap();
        }
        out.push_str("end\n");
    }
    out
}

fn floats<const N: usize>(rest: &str, n: usize, what: &str) -> Result<[f64; N], StoreError> {
    let toks: Vec<&str> = rest.split_whitespace().collect();
    if toks.len() != N {
        return Err(corrupt(n, format!("`{what}` needs {N} numbers, got {}", toks.len())));
    }
    let mut out = [0.0; N];
    for (o, t) in out.iter_mut().zip(toks) {
        let v: f64 = parse_num(Some(t), n, what)?;
        *o = v;
        if !v.is_finite() {
            return Err(corrupt(n, format!("non-finite value in `{what}`")));
        }
    }
    Ok(out)
}

fn color(values: &[f64], n: usize) -> Result<[u8; 3], StoreError> {
    let mut c = [0u8; 3];
    for (o, v) in c.iter_mut().zip(values) {
        if v.fract() != 0.0 || !(0.0..=255.0).contains(v) {
            return Err(corrupt(n, format!("colour component {v} is not an integer in 0..=255")));
        }
        *o = *v as u8;
    }
    Ok(c)
}

pub fn scene_from_text(text: &str) -> Result<SceneSpec, StoreError> {
    let mut lines = Lines::new(text, true);
    header(&mut lines, SCENE_MAGIC, SCENE_VERSION, "scene")?;
    let mut table = None;
    let mut lighting = None;
    let mut objects = Vec::new();
    while let Ok((n, l)) = lines.next() {
        let (word, rest) = l.split_once(' ').unwrap_or((l, ""));
        match word {
            "table" => {
                let v: [f64; 10] = floats(rest, n, "table")?;
                let normal = Vec3::new(v[3], v[4], v[5]);
                if normal.norm() < 1e-9 || v[6] <= 0.0 {
                    return Err(corrupt(n, "table needs a non-zero normal and a positive extent"));
                }
                table = Some(Table {
                    point: Vec3::new(v[0], v[1], v[2]),
                    normal,
                    extent: v[6],
                    color: color(&v[7..], n)?,
                });
            }
            "light" => {
                let v: [f64; 5] = floats(rest, n, "light")?;
                lighting = Some(Lighting {
                    ambient: v[0],
                    diffuse: v[1],
                    direction: Vec3::new(v[2], v[3], v[4]),
                });
            }
            "object" => {
                if rest.is_empty() {
                    return Err(corrupt(n, "object needs a name"));
                }
                objects.push(parse_object(rest, n, &mut lines)?);
            }
            _ => return Err(corrupt(n, format!("unexpected `{word}`"))),
        }
    }
    let table = table.ok_or_else(|| corrupt(lines.last, "missing table definition"))?;
    Ok(SceneSpec {
        objects,
        table: Some(table),
        lighting: lighting.unwrap_or_default(),
    })
}

fn parse_object(name: &str, start: usize, lines: &mut Lines) -> Result<SceneObject, StoreError> {
    let (n, l) = lines.next()?;
    let v: [f64; 7] = floats(keyword(l, n, "pose")?, n, "pose")?;
    let q = Quaternion::new(v[3], v[4], v[5], v[6]);
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(corrupt(n, format!("pose quaternion has norm {}, expected 1", q.norm())));
    }
    let pose = Pose {
        translation: Vec3::new(v[0], v[1], v[2]),
        rotation: UnitQuaternion::new_unchecked(q),
    };
    let mut mesh = Mesh::default();
    let mut face_lines = Vec::new();
    loop {
        let (n, l) = lines.next()?;
        let (word, rest) = l.split_once(' ').unwrap_or((l, ""));
        match word {
            "v" => {
                let p: [f64; 3] = floats(rest, n, "v")?;
                mesh.vertices.push(Vec3::new(p[0], p[1], p[2]));
            }
            "f" => {
                let p: [f64; 6] = floats(rest, n, "f")?;
                let mut idx = [0usize; 3];
                for (o, x) in idx.iter_mut().zip(&p[..3]) {
                    if x.fract() != 0.0 || *x < 0.0 {
                        return Err(corrupt(n, format!("bad vertex index {x}")));
                    }
                    *o = *x as usize;
                }
                mesh.faces.push(Face {
                    indices: idx,
                    color: color(&p[3..], n)?,
                });
                face_lines.push(n);
            }
            "end" if rest.is_empty() => break,
            _ => return Err(corrupt(n, format!("unexpected `{word}` inside object"))),
        }
    }
    mesh.validate().map_err(|e| {
        let line = match e {
            crate::renderer::MeshError::Degenerate(f) | crate::renderer::MeshError::BadIndex { face: f, .. } => {
                face_lines[f]
            }
            _ => start,
        };
        corrupt(line, format!("object `{name}`: {e}"))
    })?;
    Ok(SceneObject {
        name: name.to_string(),
        mesh,
        pose,
    })
}

pub fn load_scene(path: &Path) -> Result<SceneSpec, StoreError> {
    scene_from_text(&read_text(path)?)
}

pub fn save_scene(scene: &SceneSpec, path: &Path) -> Result<(), StoreError> {
    write_text(path, &scene_to_text(scene))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmenter::Background;
    use crate::gov::GovWeights;
    use crate::renderer::mesh::{make_box, make_gear_like, GearParams};

    #[test]
    fn config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let mut c = Config::default();
        c.gov.weights = GovWeights::new(0.4, 0.3, 0.2, 0.1).unwrap();
        c.augment.two_d.backgrounds = vec![Background::Keep, Background::Color([1, 2, 3])];
        c.camera.noise_sigma = 0.75;
        save_config(&c, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# canonview-config 1\n"));
        let back = load_config(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn config_errors() {
        let base = Config::default().to_text();
        let bad_weights = base.replace(
            "weights = [0.25, 0.25, 0.25, 0.25]",
            "weights = [0.25, 0.25, 0.25, 0.15]",
        );
        assert_ne!(bad_weights, base);
        let e = Config::from_text(&bad_weights).unwrap_err().to_string();
        assert!(e.contains("gov.weights"), "{e}");

        let unknown = base.replace("[camera]\n", "[camera]\nexposure = 3\n");
        let e = Config::from_text(&unknown).unwrap_err().to_string();
        assert!(e.contains("exposure"), "{e}");

        let range = base.replace("budget = 12", "budget = 0");
        let e = Config::from_text(&range).unwrap_err().to_string();
        assert!(e.contains("explorer.budget") && e.contains(">= 1"), "{e}");

        let v2 = base.replacen("# canonview-config 1", "# canonview-config 2", 1);
        assert!(matches!(
            Config::from_text(&v2),
            Err(StoreError::VersionMismatch { .. })
        ));

        let missing = load_config(Path::new("/nonexistent/dir/c.toml"));
        assert!(matches!(missing, Err(StoreError::Missing(_))));
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = Config::from_text(
            "# canonview-config 1\n[explorer]\nbudget = 20\ncanonical_k = 3\nstart_view = 0\nseed = 1\n",
        )
        .unwrap();
        assert_eq!(c.explorer.budget, 20);
        assert_eq!(c.sphere, SphereConfig::default());
    }

    fn fv(seed: f64) -> FeatureVector {
        FeatureVector::try_from(
            (0..FEATURE_DIM)
                .map(|k| (k as f64 * 0.37 + seed).sin() / 3.0)
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn two_models() -> Registry {
        let mut r = Registry::new(0.6);
        r.register_features("input shaft", vec![fv(0.1), fv(0.2)]).unwrap();
        r.register_features("gear", vec![fv(1.0 / 3.0)]).unwrap();
        r
    }

    #[test]
    fn registry_round_trip_is_byte_identical() {
        let r = two_models();
        let text = registry_to_text(&r);
        let back = registry_from_text(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(registry_to_text(&back), text);

        let empty = Registry::default();
        assert_eq!(registry_from_text(&registry_to_text(&empty)).unwrap(), empty);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.txt");
        save_registry(&r, &p).unwrap();
        assert_eq!(load_registry(&p).unwrap(), r);
    }

    #[test]
    fn registry_corruption_is_located() {
        let text = registry_to_text(&two_models());
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        match registry_from_text(&cut) {
            Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }
        let bad: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 4 {
                    format!("{l} oops\n")
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        assert!(matches!(
            registry_from_text(&bad),
            Err(StoreError::Corrupt { line: 5, .. })
        ));
        let future = text.replacen("canonview-registry 1", "canonview-registry 9", 1);
        assert!(matches!(
            registry_from_text(&future),
            Err(StoreError::VersionMismatch { .. })
        ));
        assert!(matches!(
            registry_from_text(""),
            Err(StoreError::Corrupt { line: 1, .. })
        ));
    }

    #[test]
    fn scene_round_trip() {
        let mut scene = SceneSpec::single("gear", make_gear_like(&GearParams::default(), 4).unwrap());
        scene.objects[0].pose.rotation = UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3);
        let text = scene_to_text(&scene);
        let back = scene_from_text(&text).unwrap();
        assert_eq!(back, scene);
        assert_eq!(scene_to_text(&back), text);
    }

    #[test]
    fn scene_errors() {
        let scene = SceneSpec::single("cube", make_box([10.0; 3], 0).unwrap());
        let text = scene_to_text(&scene);
        let no_table: String = text
            .lines()
            .filter(|l| !l.starts_with("table"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(scene_from_text(&no_table)
            .unwrap_err()
            .to_string()
            .contains("missing table"));

        // Collapse the first face onto a single vertex.
        let first_face = text.lines().position(|l| l.starts_with("f ")).unwrap();
        let degenerate: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == first_face {
                    "f 0 0 1 9 9 9\n".to_string()
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        match scene_from_text(&degenerate) {
            Err(StoreError::Corrupt { line, message }) => {
                assert_eq!(line, first_face + 1);
                assert!(message.contains("degenerate") || message.contains("zero"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad_num = text.replacen("v ", "v q", 1);
        assert!(matches!(scene_from_text(&bad_num), Err(StoreError::Corrupt { .. })));
    }
}
