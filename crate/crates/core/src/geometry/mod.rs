//! Triangle meshes with per-vertex shading frames.

mod obj;
pub mod primitives;
mod sampling;

use std::path::Path;

use glam::{DVec2, DVec3};
use thiserror::Error;

pub use obj::{load_mesh, parse_obj, write_obj};
pub use sampling::sample_surface;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("cannot read mesh {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: non-triangulated face with {corners} corners")]
    NonTriangulated { line: usize, corners: usize },
    #[error("mesh has no texture coordinates; UVs are required for baking")]
    MissingUvs,
    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },
    #[error("mesh has no faces")]
    Empty,
    #[error("degenerate mesh: total surface area is zero")]
    ZeroArea,
    #[error("non-finite value in mesh data")]
    NonFinite,
}

/// Triangle mesh normalized into the unit sphere, with unit normals and
/// tangents orthogonalized against them.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<DVec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Vec<DVec3>,
    pub tangents: Vec<DVec3>,
    pub uvs: Vec<DVec2>,
}

/// A point on the mesh surface with its interpolated shading frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub position: DVec3,
    pub normal: DVec3,
    /// Rows are tangent, bitangent, normal.
    pub tangent_frame: [DVec3; 3],
    pub uv: DVec2,
    pub face: usize,
    pub barycentric: DVec3,
}

impl Mesh {
    /// Builds a mesh from raw arrays. Missing normals are derived
    /// (area-weighted); tangents always come from UV gradients. When
    /// `normalize` is set the positions are centered and scaled into the unit
    /// sphere.
    pub fn from_parts(
        vertices: Vec<DVec3>,
        faces: Vec<[u32; 3]>,
        uvs: Vec<DVec2>,
        normals: Option<Vec<DVec3>>,
        normalize: bool,
    ) -> Result<Mesh, GeometryError> {
        if faces.is_empty() {
            return Err(GeometryError::Empty);
        }
        if uvs.len() != vertices.len() {
            return Err(GeometryError::MissingUvs);
        }
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i as usize >= vertices.len() {
                    return Err(GeometryError::IndexOutOfRange {
                        face: fi,
                        index: i as usize,
                        count: vertices.len(),
                    });
                }
            }
        }
        if !vertices.iter().all(|v| v.is_finite()) || !uvs.iter().all(|t| t.is_finite()) {
            return Err(GeometryError::NonFinite);
        }

        let mut vertices = vertices;
        if normalize {
            normalize_to_unit_sphere(&mut vertices);
        }
        let normals = match normals {
            Some(n) if n.len() == vertices.len() && n.iter().all(|v| v.length() > 1e-12) => {
                n.into_iter().map(|v| v.normalize()).collect()
            }
            _ => area_weighted_normals(&vertices, &faces),
        };
        let tangents = uv_tangents(&vertices, &faces, &uvs, &normals);
        Ok(Mesh {
            vertices,
            faces,
            normals,
            tangents,
            uvs,
        })
    }

    pub fn load(path: &Path) -> Result<Mesh, GeometryError> {
        load_mesh(path)
    }

    pub fn face_positions(&self, face: usize) -> [DVec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_positions(face);
        0.5 * (b - a).cross(c - a).length()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Interpolates position, frame and UV at barycentric weights `bary` on
    /// `face`.
    pub fn surface_point(&self, face: usize, bary: DVec3) -> SurfacePoint {
        let f = self.faces[face];
        let idx = [f[0] as usize, f[1] as usize, f[2] as usize];
        let lerp3 = |v: &[DVec3]| v[idx[0]] * bary.x + v[idx[1]] * bary.y + v[idx[2]] * bary.z;
        let position = lerp3(&self.vertices);
        let normal = lerp3(&self.normals).normalize_or(self.face_normal(face));
        let tangent = orthonormal_tangent(lerp3(&self.tangents), normal);
        let bitangent = normal.cross(tangent);
        let uv = self.uvs[idx[0]] * bary.x + self.uvs[idx[1]] * bary.y + self.uvs[idx[2]] * bary.z;
        SurfacePoint {
            position,
            normal,
            tangent_frame: [tangent, bitangent, normal],
            uv,
            face,
            barycentric: bary,
        }
    }

    pub fn face_normal(&self, face: usize) -> DVec3 {
        let [a, b, c] = self.face_positions(face);
        (b - a).cross(c - a).normalize_or(DVec3::Z)
    }
}

fn normalize_to_unit_sphere(vertices: &mut [DVec3]) {
    let (mut lo, mut hi) = (DVec3::splat(f64::INFINITY), DVec3::splat(f64::NEG_INFINITY));
    for v in vertices.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let center = (lo + hi) * 0.5;
    let radius = vertices
        .iter()
        .map(|v| (*v - center).length())
        .fold(0.0, f64::max);
    let scale = if radius > 0.0 { 1.0 / radius } else { 1.0 };
    for v in vertices.iter_mut() {
        *v = (*v - center) * scale;
    }
}

/// Area-weighted vertex normals. Vertices sharing a position (UV seams) are
/// averaged together so seams do not split the shading normal.
fn area_weighted_normals(vertices: &[DVec3], faces: &[[u32; 3]]) -> Vec<DVec3> {
    let keys: Vec<[u64; 3]> = vertices
        .iter()
        .map(|v| [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()])
        .collect();
    let mut groups = std::collections::HashMap::new();
    let group_of: Vec<usize> = keys
        .iter()
        .map(|k| {
            let n = groups.len();
            *groups.entry(*k).or_insert(n)
        })
        .collect();
    let mut acc = vec![DVec3::ZERO; groups.len()];
    for f in faces {
        let [a, b, c] = [0, 1, 2].map(|i| vertices[f[i] as usize]);
        // Cross product length is twice the area: the weighting is implicit.
        let n = (b - a).cross(c - a);
        for &i in f {
            acc[group_of[i as usize]] += n;
        }
    }
    group_of
        .iter()
        .map(|&g| acc[g].normalize_or(DVec3::Y))
        .collect()
}

fn uv_tangents(
    vertices: &[DVec3],
    faces: &[[u32; 3]],
    uvs: &[DVec2],
    normals: &[DVec3],
) -> Vec<DVec3> {
    let mut acc = vec![DVec3::ZERO; vertices.len()];
    for f in faces {
        let [i0, i1, i2] = f.map(|i| i as usize);
        let e1 = vertices[i1] - vertices[i0];
        let e2 = vertices[i2] - vertices[i0];
        let d1 = uvs[i1] - uvs[i0];
        let d2 = uvs[i2] - uvs[i0];
        let det = d1.x * d2.y - d2.x * d1.y;
        if det.abs() < 1e-14 {
            continue;
        }
        let dp_du = (e1 * d2.y - e2 * d1.y) / det;
        let area = 0.5 * e1.cross(e2).length();
        if let Some(t) = dp_du.try_normalize() {
            for i in [i0, i1, i2] {
                acc[i] += t * area;
            }
        }
    }
    acc.iter()
        .zip(normals)
        .map(|(&t, &n)| orthonormal_tangent(t, n))
        .collect()
}

/// Gram-Schmidt `t` against unit `n`; falls back to an arbitrary
/// perpendicular when `t` is degenerate or parallel to `n`.
pub fn orthonormal_tangent(t: DVec3, n: DVec3) -> DVec3 {
    let projected = t - n * n.dot(t);
    match projected.try_normalize() {
        Some(v) if projected.length() > 1e-8 => v,
        _ => n.any_orthonormal_vector(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triangle_tangent_is_dp_du() {
        // Skewed triangle: dP/dU = e1 * dv2 - e2 * dv1 = (2,0,0) for these UVs.
        let verts = vec![DVec3::ZERO, DVec3::new(2.0, 0.0, 0.0), DVec3::new(1.0, 1.0, 0.0)];
        let uvs = vec![DVec2::new(0.0, 0.0), DVec2::new(1.0, 0.0), DVec2::new(0.0, 1.0)];
        let mesh = Mesh::from_parts(verts, vec![[0, 1, 2]], uvs, None, true).unwrap();
        for t in &mesh.tangents {
            assert!((*t - DVec3::X).length() < 1e-9, "{t:?}");
        }
        for n in &mesh.normals {
            assert!((*n - DVec3::Z).length() < 1e-9);
        }
    }

    #[test]
    fn degenerate_uvs_fall_back_to_perpendicular_tangent() {
        let verts = vec![DVec3::ZERO, DVec3::X, DVec3::Y];
        let uvs = vec![DVec2::ZERO; 3];
        let mesh = Mesh::from_parts(verts, vec![[0, 1, 2]], uvs, None, false).unwrap();
        for (t, n) in mesh.tangents.iter().zip(&mesh.normals) {
            assert!(t.dot(*n).abs() < 1e-9);
            assert!((t.length() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalization_fits_unit_sphere() {
        let mesh = primitives::uv_sphere(16, 8);
        let verts: Vec<DVec3> = mesh.vertices.iter().map(|v| *v * 7.0 + DVec3::splat(3.0)).collect();
        let m = Mesh::from_parts(verts, mesh.faces.clone(), mesh.uvs.clone(), None, true).unwrap();
        let max_r = m.vertices.iter().map(|v| v.length()).fold(0.0, f64::max);
        assert!((max_r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let verts = vec![DVec3::ZERO, DVec3::X, DVec3::Y];
        let uvs = vec![DVec2::ZERO; 3];
        let err = Mesh::from_parts(verts, vec![[0, 1, 5]], uvs, None, false).unwrap_err();
        assert!(matches!(err, GeometryError::IndexOutOfRange { index: 5, .. }));
    }
}
