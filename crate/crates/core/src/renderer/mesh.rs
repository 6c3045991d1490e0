//! Triangle meshes with per-face colour, plus procedural part generators.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Rgb, Vec3};

/// Triangles with area at or below this (mm²) are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be at least {min}, got {value}")]
    TooFew {
        name: &'static str,
        min: usize,
        value: usize,
    },
    #[error("face {face} references vertex {vertex}, but the mesh has {count} vertices")]
    BadIndex { face: usize, vertex: usize, count: usize },
    #[error("face {0} is degenerate (zero area)")]
    Degenerate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub indices: [usize; 3],
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<Face>,
}

impl Mesh {
    /// Check indices and reject zero-area triangles.
    pub fn validate(&self) -> Result<(), MeshError> {
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in &f.indices {
                if v >= self.vertices.len() {
                    return Err(MeshError::BadIndex {
                        face: fi,
                        vertex: v,
                        count: self.vertices.len(),
                    });
                }
            }
            if self.triangle_area(fi) <= MIN_TRIANGLE_AREA {
                return Err(MeshError::Degenerate(fi));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face].indices;
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Axis-aligned bounds `(min, max)`; zeros for an empty mesh.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut it = self.vertices.iter();
        let Some(first) = it.next() else {
            return (Vec3::zeros(), Vec3::zeros());
        };
        it.fold((*first, *first), |(lo, hi), v| (lo.inf(v), hi.sup(v)))
    }

    /// Shift so the bounding-box centre sits at the origin.
    pub fn centered(mut self) -> Self {
        let (lo, hi) = self.bounds();
        let c = (lo + hi) * 0.5;
        for v in &mut self.vertices {
            *v -= c;
        }
        self
    }

    /// Replace every face colour according to its role in `roles`
    /// (0 = primary, otherwise secondary).
    fn painted(mut self, roles: &[u8], scheme: &ColorScheme) -> Self {
        for (f, &r) in self.faces.iter_mut().zip(roles) {
            f.color = if r == 0 { scheme.primary } else { scheme.secondary };
        }
        self
    }

    fn push_tri(&mut self, roles: &mut Vec<u8>, a: usize, b: usize, c: usize, role: u8) {
        self.faces.push(Face {
            indices: [a, b, c],
            color: [0, 0, 0],
        });
        roles.push(role);
    }
}

/// Two-colour paint job for a procedural part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorScheme {
    pub primary: Rgb,
    pub secondary: Rgb,
}

impl ColorScheme {
    /// Saturated primary hue with a complementary-ish secondary, drawn from `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hue = rng.random_range(0.0..360.0);
        let offset = rng.random_range(120.0..240.0);
        Self {
            primary: hsv_to_rgb(hue, 0.85, 0.85),
            secondary: hsv_to_rgb((hue + offset) % 360.0, 0.75, 0.75),
        }
    }

    pub fn from_hues(primary: f64, secondary: f64) -> Self {
        Self {
            primary: hsv_to_rgb(primary, 0.85, 0.85),
            secondary: hsv_to_rgb(secondary, 0.75, 0.75),
        }
    }
}

/// Hue in degrees, saturation and value in [0, 1].
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

fn positive(name: &'static str, value: f64) -> Result<(), MeshError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MeshError::NonPositive { name, value })
    }
}

/// Axis-aligned box centred at the origin: 12 triangles. Top and bottom take
/// the primary colour, the x-facing sides the secondary.
pub fn make_box(size: [f64; 3], seed: u64) -> Result<Mesh, MeshError> {
    make_box_with(size, &ColorScheme::from_seed(seed))
}

pub fn make_box_with(size: [f64; 3], scheme: &ColorScheme) -> Result<Mesh, MeshError> {
    positive("box width", size[0])?;
    positive("box depth", size[1])?;
    positive("box height", size[2])?;
    let [hx, hy, hz] = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let mut m = Mesh::default();
    for i in 0..8 {
        m.vertices.push(Vec3::new(
            if i & 1 == 0 { -hx } else { hx },
            if i & 2 == 0 { -hy } else { hy },
            if i & 4 == 0 { -hz } else { hz },
        ));
    }
    // Outward-wound quads.
    let quads: [([usize; 4], u8); 6] = [
        ([0, 2, 3, 1], 0), // -z
        ([4, 5, 7, 6], 0), // +z
        ([0, 1, 5, 4], 1), // -y
        ([2, 6, 7, 3], 1), // +y
        ([0, 4, 6, 2], 0), // -x
        ([1, 3, 7, 5], 0), // +x
    ];
    let mut roles = Vec::new();
    for ([a, b, c, d], role) in quads {
        m.push_tri(&mut roles, a, b, c, role);
        m.push_tri(&mut roles, a, c, d, role);
    }
    Ok(m.painted(&roles, scheme))
}

/// Closed cylinder along z with `segments` sides: `4 · segments` triangles.
pub fn make_cylinder(radius: f64, height: f64, segments: usize, seed: u64) -> Result<Mesh, MeshError> {
    make_cylinder_with(radius, height, segments, &ColorScheme::from_seed(seed))
}

pub fn make_cylinder_with(radius: f64, height: f64, segments: usize, scheme: &ColorScheme) -> Result<Mesh, MeshError> {
    positive("cylinder radius", radius)?;
    positive("cylinder height", height)?;
    if segments < 3 {
        return Err(MeshError::TooFew {
            name: "cylinder segments",
            min: 3,
            value: segments,
        });
    }
    let profile = [(radius, -height / 2.0), (radius, height / 2.0)];
    revolve(&profile, segments, scheme)
}

/// Gear-like disc: an extruded tooth outline with `teeth` teeth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GearParams {
    pub teeth: usize,
    pub root_radius: f64,
    pub tip_radius: f64,
    pub thickness: f64,
}

impl Default for GearParams {
    fn default() -> Self {
        Self {
            teeth: 8,
            root_radius: 35.0,
            tip_radius: 45.0,
            thickness: 25.0,
        }
    }
}

impl GearParams {
    /// Outline polygon in the xy-plane, counter-clockwise.
    pub fn outline(&self) -> Vec<(f64, f64)> {
        let pitch = TAU / self.teeth as f64;
        let mut pts = Vec::with_capacity(self.teeth * 4);
        for t in 0..self.teeth {
            let base = pitch * t as f64;
            for (frac, r) in [
                (0.0, self.root_radius),
                (0.15, self.tip_radius),
                (0.35, self.tip_radius),
                (0.5, self.root_radius),
            ] {
                let a = base + frac * pitch;
                pts.push((r * a.cos(), r * a.sin()));
            }
        }
        pts
    }
}

/// `16 · teeth` triangles: two fan caps of `4 · teeth` plus `8 · teeth` on the flanks.
pub fn make_gear_like(params: &GearParams, seed: u64) -> Result<Mesh, MeshError> {
    make_gear_like_with(params, &ColorScheme::from_seed(seed))
}

pub fn make_gear_like_with(params: &GearParams, scheme: &ColorScheme) -> Result<Mesh, MeshError> {
    if params.teeth < 3 {
        return Err(MeshError::TooFew {
            name: "gear teeth",
            min: 3,
            value: params.teeth,
        });
    }
    positive("gear root radius", params.root_radius)?;
    positive("gear tip radius", params.tip_radius)?;
    positive("gear thickness", params.thickness)?;
    if params.tip_radius <= params.root_radius {
        return Err(MeshError::NonPositive {
            name: "gear tooth depth",
            value: params.tip_radius - params.root_radius,
        });
    }
    let outline = params.outline();
    let n = outline.len();
    let hz = params.thickness / 2.0;
    let mut m = Mesh::default();
    let mut roles = Vec::new();
    for &(x, y) in &outline {
        m.vertices.push(Vec3::new(x, y, -hz));
    }
    for &(x, y) in &outline {
        m.vertices.push(Vec3::new(x, y, hz));
    }
    let bottom_c = m.vertices.len();
    m.vertices.push(Vec3::new(0.0, 0.0, -hz));
    let top_c = m.vertices.len();
    m.vertices.push(Vec3::new(0.0, 0.0, hz));
    for i in 0..n {
        let j = (i + 1) % n;
        m.push_tri(&mut roles, top_c, n + i, n + j, 0);
        m.push_tri(&mut roles, bottom_c, j, i, 0);
        m.push_tri(&mut roles, i, j, n + j, 1);
        m.push_tri(&mut roles, i, n + j, n + i, 1);
    }
    Ok(m.painted(&roles, scheme))
}

/// Stepped shaft along z: coaxial segments of `(radius, length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShaftParams {
    pub segments: Vec<(f64, f64)>,
    pub sides: usize,
}

impl Default for ShaftParams {
    fn default() -> Self {
        Self {
            segments: vec![(12.0, 30.0), (20.0, 25.0), (14.0, 35.0)],
            sides: 16,
        }
    }
}

pub fn make_shaft(params: &ShaftParams, seed: u64) -> Result<Mesh, MeshError> {
    make_shaft_with(params, &ColorScheme::from_seed(seed))
}

pub fn make_shaft_with(params: &ShaftParams, scheme: &ColorScheme) -> Result<Mesh, MeshError> {
    if params.segments.is_empty() {
        return Err(MeshError::TooFew {
            name: "shaft segments",
            min: 1,
            value: 0,
        });
    }
    if params.sides < 3 {
        return Err(MeshError::TooFew {
            name: "shaft sides",
            min: 3,
            value: params.sides,
        });
    }
    let total: f64 = params.segments.iter().map(|s| s.1).sum();
    let mut z = -total / 2.0;
    let mut profile = Vec::new();
    for &(r, len) in &params.segments {
        positive("shaft segment radius", r)?;
        positive("shaft segment length", len)?;
        profile.push((r, z));
        z += len;
        profile.push((r, z));
    }
    revolve(&profile, params.sides, scheme)
}

/// Surface of revolution about z from a profile of `(radius, z)` points,
/// capped at both ends. Horizontal steps between equal-z points become
/// annuli. Profile spans alternate colours.
fn revolve(profile: &[(f64, f64)], sides: usize, scheme: &ColorScheme) -> Result<Mesh, MeshError> {
    let mut m = Mesh::default();
    let mut roles = Vec::new();
    let ring = |m: &mut Mesh, r: f64, z: f64| -> usize {
        let start = m.vertices.len();
        for k in 0..sides {
            let a = TAU * k as f64 / sides as f64;
            m.vertices.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
        start
    };
    let rings: Vec<usize> = profile.iter().map(|&(r, z)| ring(&mut m, r, z)).collect();
    for w in 0..profile.len() - 1 {
        let (r0, r1) = (profile[w].0, profile[w + 1].0);
        if (profile[w].1 - profile[w + 1].1).abs() < 1e-12 && (r0 - r1).abs() < 1e-12 {
            continue;
        }
        let (a, b) = (rings[w], rings[w + 1]);
        let role = (w / 2 % 2) as u8;
        for k in 0..sides {
            let k1 = (k + 1) % sides;
            m.push_tri(&mut roles, a + k, a + k1, b + k1, role);
            m.push_tri(&mut roles, a + k, b + k1, b + k, role);
        }
    }
    let (_, z0) = profile[0];
    let (_, z1) = profile[profile.len() - 1];
    let c0 = m.vertices.len();
    m.vertices.push(Vec3::new(0.0, 0.0, z0));
    let c1 = m.vertices.len();
    m.vertices.push(Vec3::new(0.0, 0.0, z1));
    let (first, last) = (rings[0], rings[rings.len() - 1]);
    for k in 0..sides {
        let k1 = (k + 1) % sides;
        m.push_tri(&mut roles, c0, first + k1, first + k, 1);
        m.push_tri(&mut roles, c1, last + k, last + k1, 1);
    }
    let m = m.painted(&roles, scheme);
    m.validate()?;
    Ok(m)
}
