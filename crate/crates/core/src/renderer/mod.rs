//! Software RGB-D camera.
//!
//! Scenes are triangle meshes standing on a square tabletop. [`render`]
//! casts one ray per pixel through the pixel's integer coordinate and keeps
//! the nearest hit, producing registered colour and z-depth images. Work is
//! split into horizontal bands; each band culls triangles by their projected
//! bounding box before running the exact ray/triangle test, so the result is
//! identical to brute-force casting.

pub mod mesh;
pub mod pnm;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::par;
use crate::viewsphere::CameraPose;
use crate::{Rgb, Vec3};
pub use mesh::{ColorScheme, Face, Mesh, MeshError};

/// Depth value of pixels whose ray hit nothing.
pub const INVALID_DEPTH: f64 = 0.0;
/// Hits closer than this (mm, along the optical axis) are ignored.
pub const NEAR_PLANE: f64 = 1.0;

const BAND_ROWS: usize = 8;

/// Rigid placement of an object. The quaternion is stored exactly as given so
/// scene files re-serialise byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }
}

impl Pose {
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub mesh: Mesh,
    pub pose: Pose,
}

impl SceneObject {
    pub fn world_vertices(&self) -> Vec<Vec3> {
        self.mesh.vertices.iter().map(|v| self.pose.apply(v)).collect()
    }

    pub fn world_bounds(&self) -> (Vec3, Vec3) {
        let vs = self.world_vertices();
        let first = vs.first().copied().unwrap_or_else(Vec3::zeros);
        vs.iter().fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v)))
    }
}

/// Square tabletop of half-size `extent` centred on `point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub point: Vec3,
    pub normal: Vec3,
    pub extent: f64,
    pub color: Rgb,
}

impl Table {
    pub fn horizontal(z: f64) -> Self {
        Self {
            point: Vec3::new(0.0, 0.0, z),
            normal: Vec3::z(),
            extent: 600.0,
            color: [150, 150, 150],
        }
    }

    /// Orthonormal in-plane axes.
    pub fn axes(&self) -> (Vec3, Vec3) {
        let n = self.normal.normalize();
        let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = (helper - n * n.dot(&helper)).normalize();
        (u, n.cross(&u))
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let (u, v) = self.axes();
        let e = self.extent;
        [
            self.point + (-u - v) * e,
            self.point + (u - v) * e,
            self.point + (u + v) * e,
            self.point + (-u + v) * e,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lighting {
    pub ambient: f64,
    pub diffuse: f64,
    /// Unit vector pointing towards the light.
    pub direction: Vec3,
}

impl Default for Lighting {
    fn default() -> Self {
        Self {
            ambient: 0.35,
            diffuse: 0.65,
            direction: Vec3::new(0.3, 0.2, 1.0).normalize(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub table: Option<Table>,
    pub lighting: Lighting,
}

impl SceneSpec {
    /// One object with its bounding-box centre at the origin (the view
    /// sphere's centre), resting on a horizontal table.
    pub fn single(name: impl Into<String>, mesh: Mesh) -> Self {
        let mesh = mesh.centered();
        let (lo, _) = mesh.bounds();
        Self {
            objects: vec![SceneObject {
                name: name.into(),
                mesh,
                pose: Pose::default(),
            }],
            table: Some(Table::horizontal(lo.z)),
            lighting: Lighting::default(),
        }
    }

    /// Several objects standing on a table at height `table_z`, each centred
    /// at its `(x, y)` position and rotated by `yaw` radians.
    pub fn arrangement(table_z: f64, items: Vec<(String, Mesh, [f64; 2], f64)>) -> Self {
        let objects = items
            .into_iter()
            .map(|(name, mesh, [x, y], yaw)| {
                let mesh = mesh.centered();
                let rotation = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw);
                let mut obj = SceneObject {
                    name,
                    mesh,
                    pose: Pose {
                        translation: Vec3::zeros(),
                        rotation,
                    },
                };
                let (lo, _) = obj.world_bounds();
                obj.pose.translation = Vec3::new(x, y, table_z - lo.z);
                obj
            })
            .collect();
        Self {
            objects,
            table: Some(Table::horizontal(table_z)),
            lighting: Lighting::default(),
        }
    }

    /// The same scene with every object turned upside down (half-turn about
    /// its own x-axis) and re-seated on the table, so the previously hidden
    /// side faces up.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        let half_turn = UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI);
        for obj in &mut out.objects {
            let (lo0, hi0) = obj.world_bounds();
            let centre = (lo0 + hi0) * 0.5;
            obj.pose.rotation = half_turn * obj.pose.rotation;
            obj.pose.translation = half_turn * (obj.pose.translation - centre) + centre;
            let (lo1, _) = obj.world_bounds();
            let floor = self.table.map(|t| t.point.z).unwrap_or(lo0.z);
            obj.pose.translation.z += floor - lo1.z;
        }
        out
    }

    /// Centre of the objects' joint bounding box (origin for an empty scene);
    /// the point the view sphere is centred on.
    pub fn focus(&self) -> Vec3 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for obj in &self.objects {
            let (a, b) = obj.world_bounds();
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
        if self.objects.is_empty() {
            Vec3::zeros()
        } else {
            (lo + hi) * 0.5
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.objects.iter().map(|o| o.mesh.faces.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Principal point at the image centre.
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    /// Camera-frame point to (sub)pixel coordinates.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new((u - self.cx) * depth / self.fx, (v - self.cy) * depth / self.fy, depth)
    }
}

/// Registered colour and depth images.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdFrame {
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    pub color: Vec<Rgb>,
    /// z-depth in mm; [`INVALID_DEPTH`] where nothing was hit.
    pub depth: Vec<f64>,
}

impl RgbdFrame {
    pub fn index(&self, u: usize, v: usize) -> usize {
        v * self.width + u
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.depth[i] > INVALID_DEPTH
    }

    /// Back-projected camera-frame point of pixel `i`, if it carries depth.
    pub fn point(&self, i: usize) -> Option<Vec3> {
        if !self.is_valid(i) {
            return None;
        }
        let (u, v) = (i % self.width, i / self.width);
        Some(self.intrinsics.back_project(u as f64, v as f64, self.depth[i]))
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|&&d| d > INVALID_DEPTH).count()
    }
}

/// Which primitive each pixel's ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HitLabel {
    Nothing,
    Table,
    Object(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<HitLabel>,
}

impl LabelImage {
    pub fn count(&self, label: HitLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Vec3,
    pub color: Rgb,
    /// Linear pixel index the point came from.
    pub pixel: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Every valid pixel `(u, v, d)` becomes `((u−cx)·d/fx, (v−cy)·d/fy, d)`.
pub fn back_project(frame: &RgbdFrame) -> PointCloud {
    let points = (0..frame.depth.len())
        .filter_map(|i| {
            frame.point(i).map(|position| CloudPoint {
                position,
                color: frame.color[i],
                pixel: i,
            })
        })
        .collect();
    PointCloud { points }
}

/// Triangle prepared in the camera frame.
struct CamTriangle {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
    color: Rgb,
    label: HitLabel,
    rows: (usize, usize),
    cols: (usize, usize),
}

fn shade(base: Rgb, normal_world: Vec3, view_dir_world: Vec3, light: &Lighting) -> Rgb {
    // Two-sided: face the normal towards the camera.
    let n = if normal_world.dot(&view_dir_world) > 0.0 {
        -normal_world
    } else {
        normal_world
    };
    let k = light.ambient + light.diffuse * n.dot(&light.direction).max(0.0);
    base.map(|c| (c as f64 * k).round().clamp(0.0, 255.0) as u8)
}

#[allow(clippy::too_many_arguments)]
fn prepare(
    world: [Vec3; 3],
    base: Rgb,
    label: HitLabel,
    pose: &CameraPose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
    light: &Lighting,
) -> Option<CamTriangle> {
    let normal = (world[1] - world[0]).cross(&(world[2] - world[0]));
    if normal.norm() == 0.0 {
        return None;
    }
    let centroid = (world[0] + world[1] + world[2]) / 3.0;
    let color = shade(base, normal.normalize(), centroid - pose.position, light);
    let c = world.map(|p| pose.world_to_camera(&p));
    if c.iter().all(|p| p.z <= NEAR_PLANE) {
        return None;
    }
    let (rows, cols) = if c.iter().all(|p| p.z > NEAR_PLANE) {
        let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &c {
            let (u, v) = intr.project(p);
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        if u1 < -1.0 || v1 < -1.0 || u0 > width as f64 || v0 > height as f64 {
            return None;
        }
        let lo = |x: f64| (x.floor() - 1.0).max(0.0) as usize;
        let hi = |x: f64, n: usize| ((x.ceil() + 1.0).max(0.0) as usize).min(n - 1);
        ((lo(v0), hi(v1, height)), (lo(u0), hi(u1, width)))
    } else {
        // Straddles the near plane: no safe projection, test every pixel.
        ((0, height - 1), (0, width - 1))
    };
    Some(CamTriangle {
        v0: c[0],
        e1: c[1] - c[0],
        e2: c[2] - c[0],
        color,
        label,
        rows,
        cols,
    })
}

/// Möller–Trumbore with the ray origin at the camera centre.
#[inline]
fn intersect(tri: &CamTriangle, dir: &Vec3) -> Option<f64> {
    const EPS: f64 = 1e-12;
    const EDGE: f64 = 1e-9;
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < EPS {
        return None;
    }
    let inv = 1.0 / det;
    let s = -tri.v0;
    let u = s.dot(&p) * inv;
    if !(-EDGE..=1.0 + EDGE).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE || u + v > 1.0 + EDGE {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > NEAR_PLANE).then_some(t)
}

fn prepare_scene(
    scene: &SceneSpec,
    pose: &CameraPose,
    intr: &Intrinsics,
    width: usize,
    height: usize,
) -> Vec<CamTriangle> {
    let light = &scene.lighting;
    let mut tris = Vec::with_capacity(scene.triangle_count() + 2);
    if let Some(table) = &scene.table {
        let [a, b, c, d] = table.corners();
        for w in [[a, b, c], [a, c, d]] {
            tris.extend(prepare(
                w,
                table.color,
                HitLabel::Table,
                pose,
                intr,
                width,
                height,
                light,
            ));
        }
    }
    for (oi, obj) in scene.objects.iter().enumerate() {
        let verts = obj.world_vertices();
        for face in &obj.mesh.faces {
            let w = face.indices.map(|i| verts[i]);
            tris.extend(prepare(
                w,
                face.color,
                HitLabel::Object(oi),
                pose,
                intr,
                width,
                height,
                light,
            ));
        }
    }
    tris
}

/// Render colour, depth and the per-pixel hit labels.
pub fn render_labeled(
    scene: &SceneSpec,
    pose: &CameraPose,
    intrinsics: &Intrinsics,
    width: usize,
    height: usize,
) -> (RgbdFrame, LabelImage) {
    let tris = prepare_scene(scene, pose, intrinsics, width, height);
    let mut pixels = vec![(INVALID_DEPTH, [0u8; 3], HitLabel::Nothing); width * height];

    par::for_each_chunk_mut(&mut pixels, BAND_ROWS * width, |band, chunk| {
        let row0 = band * BAND_ROWS;
        let row1 = row0 + chunk.len() / width - 1;
        for tri in &tris {
            if tri.rows.1 < row0 || tri.rows.0 > row1 {
                continue;
            }
            for v in tri.rows.0.max(row0)..=tri.rows.1.min(row1) {
                let dy = (v as f64 - intrinsics.cy) / intrinsics.fy;
                for u in tri.cols.0..=tri.cols.1 {
                    let dir = Vec3::new((u as f64 - intrinsics.cx) / intrinsics.fx, dy, 1.0);
                    if let Some(t) = intersect(tri, &dir) {
                        let px = &mut chunk[(v - row0) * width + u];
                        if px.0 == INVALID_DEPTH || t < px.0 {
                            *px = (t, tri.color, tri.label);
                        }
                    }
                }
            }
        }
    });

    let frame = RgbdFrame {
        width,
        height,
        intrinsics: *intrinsics,
        color: pixels.iter().map(|p| p.1).collect(),
        depth: pixels.iter().map(|p| p.0).collect(),
    };
    let labels = LabelImage {
        width,
        height,
        labels: pixels.iter().map(|p| p.2).collect(),
    };
    (frame, labels)
}

/// Nearest-hit ray cast of `scene` from `pose`.
pub fn render(scene: &SceneSpec, pose: &CameraPose, intrinsics: &Intrinsics, width: usize, height: usize) -> RgbdFrame {
    render_labeled(scene, pose, intrinsics, width, height).0
}

/// Additive zero-mean Gaussian depth noise on valid pixels, seeded.
pub fn add_depth_noise(frame: &mut RgbdFrame, sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    for d in frame.depth.iter_mut().filter(|d| **d > INVALID_DEPTH) {
        *d = (*d + normal.sample(&mut rng)).max(NEAR_PLANE + 1e-6);
    }
}
