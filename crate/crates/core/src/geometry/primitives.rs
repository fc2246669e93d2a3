//! Procedural meshes used by tests, demos and the acceptance suite.

use std::f64::consts::PI;

use glam::{DVec2, DVec3};

use super::Mesh;

/// Unit UV sphere centered at the origin, +Y up. `u` follows azimuth and `v`
/// runs from the south pole (0) to the north pole (1).
pub fn uv_sphere(segments: usize, rings: usize) -> Mesh {
    assert!(segments >= 3 && rings >= 2);
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    for j in 0..=rings {
        let theta = PI * j as f64 / rings as f64;
        for i in 0..=segments {
            let phi = 2.0 * PI * i as f64 / segments as f64;
            vertices.push(DVec3::new(
                theta.sin() * phi.sin(),
                theta.cos(),
                theta.sin() * phi.cos(),
            ));
            uvs.push(DVec2::new(
                i as f64 / segments as f64,
                1.0 - j as f64 / rings as f64,
            ));
        }
    }
    let stride = (segments + 1) as u32;
    let mut faces = Vec::new();
    for j in 0..rings as u32 {
        for i in 0..segments as u32 {
            let a = j * stride + i;
            let b = a + 1;
            let c = a + stride;
            let d = c + 1;
            if j != 0 {
                faces.push([a, c, b]);
            }
            if j != rings as u32 - 1 {
                faces.push([b, c, d]);
            }
        }
    }
    let normals = vertices.clone();
    Mesh::from_parts(vertices, faces, uvs, Some(normals), false)
        .expect("uv sphere construction is valid")
}
