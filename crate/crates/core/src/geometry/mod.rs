//! Meshes, point clouds, rigid transforms and the viewpoint lattice.
//!
//! Everything here is a plain value type; operations are pure functions.

mod io;
mod sampling;
mod viewpoints;

pub use io::{
    load_mesh, parse_obj, parse_off, parse_pointcloud, write_mesh_obj, write_mesh_off, write_xyz, CloudFormat,
};
pub use sampling::sample_surface;
pub use viewpoints::{fibonacci_viewpoints, Viewpoint};

use nalgebra::Matrix3;
use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("empty input")]
    Empty,
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("mesh needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("degenerate extent: all points coincide")]
    Degenerate,
    #[error("viewpoint count must be positive")]
    ZeroViewpoints,
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        centroid(&self.points)
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.points)
    }
}

/// Triangle mesh. Polygons are fan-triangulated when parsed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking face bounds and the vertex minimum.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|v| !is_finite(v)) {
            return Err(GeometryError::NonFinite(i));
        }
        for (fi, face) in faces.iter().enumerate() {
            for &index in face {
                if index >= vertices.len() {
                    return Err(GeometryError::IndexOutOfRange {
                        face: fi,
                        index,
                        count: vertices.len(),
                    });
                }
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Appends another mesh, offsetting its face indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }

    /// Same topology with every vertex passed through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Centers on the vertex centroid and scales to unit AABB diagonal.
    pub fn normalized(&self) -> Result<(TriangleMesh, Normalization), GeometryError> {
        let (vertices, record) = normalize_unit(&self.vertices)?;
        Ok((
            TriangleMesh {
                vertices,
                faces: self.faces.clone(),
            },
            record,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points(points: &[Vec3]) -> Option<Aabb> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            min = min.inf(p);
            max = max.sup(p);
        }
        Some(Aabb { min, max })
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }
}

pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}

fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Record of a centering + uniform scaling: `p' = (p - centroid) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub centroid: Vec3,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.centroid) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale + self.centroid
    }
}

/// Moves the centroid to the origin and scales the AABB diagonal to 1.
pub fn normalize_unit(points: &[Vec3]) -> Result<(Vec<Vec3>, Normalization), GeometryError> {
    let aabb = Aabb::from_points(points).ok_or(GeometryError::Empty)?;
    if let Some(i) = points.iter().position(|v| !is_finite(v)) {
        return Err(GeometryError::NonFinite(i));
    }
    let diagonal = aabb.diagonal();
    if diagonal <= 0.0 || !diagonal.is_finite() {
        return Err(GeometryError::Degenerate);
    }
    let record = Normalization {
        centroid: centroid(points).expect("non-empty"),
        scale: 1.0 / diagonal,
    };
    Ok((points.iter().map(|p| record.apply(p)).collect(), record))
}

/// Rotation followed by translation: `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    const TOLERANCE: f64 = 1e-9;

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Checked constructor: `rotation` must be orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let t = RigidTransform {
            rotation,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidTransform("non-finite entry".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if off > Self::TOLERANCE {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation not orthonormal (max |RᵀR - I| = {off:e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > Self::TOLERANCE {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation determinant {det} != 1"
            )));
        }
        Ok(())
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

pub fn apply_transform(t: &RigidTransform, points: &[Vec3]) -> Vec<Vec3> {
    points.iter().map(|p| t.apply_point(p)).collect()
}
