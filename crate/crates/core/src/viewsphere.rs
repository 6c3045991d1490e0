//! Geodesic viewpoint hemisphere.
//!
//! Viewpoints are the vertices of a class-I geodesic subdivision of an
//! icosahedron whose first vertex sits on +z (the table normal). Each edge of
//! the base icosahedron is split into `frequency` segments, giving
//! `10 f² + 2` vertices on the full sphere; a z-cutoff then keeps the upper
//! cap. Index 0 is always the top view.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// Tolerance for unit-norm checks on caller-supplied directions.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("subdivision frequency must be at least 1")]
    ZeroFrequency,
    #[error("sphere radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("cutoff must lie in [-1, 1], got {0}")]
    CutoffOutOfRange(f64),
    #[error("viewpoint index {index} out of range for {len} viewpoints")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("expected a unit vector, got norm {0}")]
    NonUnit(f64),
}

/// Candidate viewpoints on a sphere centred on the object.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSphere {
    frequency: u32,
    radius: f64,
    cutoff: f64,
    viewpoints: Vec<Vec3>,
    adjacency: Vec<Vec<usize>>,
}

impl ViewSphere {
    /// Build the viewpoint set for a given subdivision frequency, radius (mm)
    /// and minimum admitted z-component.
    pub fn build(frequency: u32, radius: f64, cutoff: f64) -> Result<Self, SphereError> {
        if frequency == 0 {
            return Err(SphereError::ZeroFrequency);
        }
        if !radius.is_finite() || radius <= 0.0 {
            return Err(SphereError::NonPositiveRadius(radius));
        }
        if !(-1.0..=1.0).contains(&cutoff) {
            return Err(SphereError::CutoffOutOfRange(cutoff));
        }

        let (points, edges) = subdivide(frequency);

        // Stable order: descending z, then ascending azimuth.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            let (za, zb) = (quantize(points[a].z), quantize(points[b].z));
            zb.cmp(&za)
                .then_with(|| azimuth(&points[a]).total_cmp(&azimuth(&points[b])))
        });

        let mut remap = vec![usize::MAX; points.len()];
        let mut viewpoints = Vec::new();
        for &old in &order {
            if points[old].z >= cutoff {
                remap[old] = viewpoints.len();
                viewpoints.push(points[old]);
            }
        }

        let mut adjacency = vec![BTreeSet::new(); viewpoints.len()];
        for (a, b) in edges {
            let (na, nb) = (remap[a], remap[b]);
            if na != usize::MAX && nb != usize::MAX {
                adjacency[na].insert(nb);
                adjacency[nb].insert(na);
            }
        }

        Ok(Self {
            frequency,
            radius,
            cutoff,
            viewpoints,
            adjacency: adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn frequency(&self) -> u32 {
        self.frequency
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    pub fn viewpoints(&self) -> &[Vec3] {
        &self.viewpoints
    }

    pub fn direction(&self, index: usize) -> Result<Vec3, SphereError> {
        self.check(index)?;
        Ok(self.viewpoints[index])
    }

    /// Subdivision-mesh neighbours of `index`, ascending.
    pub fn neighbors(&self, index: usize) -> Result<&[usize], SphereError> {
        self.check(index)?;
        Ok(&self.adjacency[index])
    }

    /// Camera placed on the sphere at `index`, looking at `target`.
    pub fn camera_pose_for(&self, index: usize, target: Vec3) -> Result<CameraPose, SphereError> {
        let dir = self.direction(index)?;
        Ok(CameraPose::look_at(target + dir * self.radius, target, DEFAULT_UP))
    }

    /// Smallest angle spanned by any adjacency edge.
    pub fn min_edge_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for (a, ns) in self.adjacency.iter().enumerate() {
            for &b in ns {
                min = min.min(angle_between(&self.viewpoints[a], &self.viewpoints[b]));
            }
        }
        min
    }

    fn check(&self, index: usize) -> Result<(), SphereError> {
        if index < self.viewpoints.len() {
            Ok(())
        } else {
            Err(SphereError::IndexOutOfRange {
                index,
                len: self.viewpoints.len(),
            })
        }
    }
}

/// Great-circle distance between two unit vectors, in radians.
pub fn geodesic_distance(a: &Vec3, b: &Vec3) -> Result<f64, SphereError> {
    for v in [a, b] {
        let n = v.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(SphereError::NonUnit(n));
        }
    }
    Ok(angle_between(a, b))
}

pub(crate) fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 keeps full precision near 0 and pi, where acos does not.
    a.cross(b).norm().atan2(a.dot(b))
}

fn quantize(z: f64) -> i64 {
    (z * 1e9).round() as i64
}

fn azimuth(p: &Vec3) -> f64 {
    let a = p.y.atan2(p.x);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Pole-up icosahedron: top vertex, two staggered rings of five, bottom vertex.
fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let ring_z = 1.0 / 5f64.sqrt();
    let ring_r = 2.0 / 5f64.sqrt();
    let mut v = vec![Vec3::new(0.0, 0.0, 1.0)];
    for k in 0..5 {
        let t = TAU * k as f64 / 5.0;
        v.push(Vec3::new(ring_r * t.cos(), ring_r * t.sin(), ring_z));
    }
    for k in 0..5 {
        let t = TAU * k as f64 / 5.0 + PI / 5.0;
        v.push(Vec3::new(ring_r * t.cos(), ring_r * t.sin(), -ring_z));
    }
    v.push(Vec3::new(0.0, 0.0, -1.0));

    let mut faces = Vec::with_capacity(20);
    for k in 0..5 {
        let (a, b) = (1 + k, 1 + (k + 1) % 5);
        let (c, d) = (6 + k, 6 + (k + 1) % 5);
        faces.push([0, a, b]);
        faces.push([a, c, b]);
        faces.push([b, c, d]);
        faces.push([c, 11, d]);
    }
    (v, faces)
}

type BaryKey = Vec<(usize, u32)>;

/// Class-I subdivision. Shared vertices are identified by their integer
/// barycentric weights over base-icosahedron vertices, so deduplication is
/// exact.
fn subdivide(f: u32) -> (Vec<Vec3>, BTreeSet<(usize, usize)>) {
    let (base, faces) = icosahedron();
    let mut ids: BTreeMap<BaryKey, usize> = BTreeMap::new();
    let mut points = Vec::new();
    let mut edges = BTreeSet::new();

    for face in &faces {
        let mut grid = BTreeMap::new();
        for i in 0..=f {
            for j in 0..=(f - i) {
                let k = f - i - j;
                let mut key: BaryKey = [(face[0], k), (face[1], i), (face[2], j)]
                    .into_iter()
                    .filter(|&(_, w)| w > 0)
                    .collect();
                key.sort_unstable();
                let id = *ids.entry(key).or_insert_with(|| {
                    let p = base[face[0]] * k as f64 + base[face[1]] * i as f64 + base[face[2]] * j as f64;
                    points.push(p.normalize());
                    points.len() - 1
                });
                grid.insert((i, j), id);
            }
        }
        let mut link = |a: usize, b: usize| {
            edges.insert((a.min(b), a.max(b)));
        };
        for i in 0..f {
            for j in 0..(f - i) {
                let here = grid[&(i, j)];
                let right = grid[&(i + 1, j)];
                let up = grid[&(i, j + 1)];
                link(here, right);
                link(here, up);
                link(right, up);
            }
        }
    }
    (points, edges)
}

/// Default roll reference; replaced by [`FALLBACK_UP`] when parallel to the
/// optical axis.
pub const DEFAULT_UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
pub const FALLBACK_UP: Vec3 = Vec3::new(1.0, 0.0, 0.0);

/// Pinhole camera pose. `rotation` maps camera-frame vectors to world frame;
/// the camera looks along its +z axis with +x right and +y down in the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub rotation: Rotation3<f64>,
    pub up_hint: Vec3,
}

impl CameraPose {
    pub fn look_at(position: Vec3, target: Vec3, up_hint: Vec3) -> Self {
        let forward = (target - position).normalize();
        let mut up = up_hint;
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            up = FALLBACK_UP;
            right = forward.cross(&up);
            if right.norm() < 1e-9 {
                up = Vec3::new(0.0, 0.0, 1.0);
                right = forward.cross(&up);
            }
        }
        let x = right.normalize();
        let y = forward.cross(&x);
        let m = Matrix3::from_columns(&[x, y, forward]);
        Self {
            position,
            rotation: Rotation3::from_matrix_unchecked(m),
            up_hint: up,
        }
    }

    pub fn optical_axis(&self) -> Vec3 {
        self.rotation * Vec3::z()
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.position)
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.position
    }
}
