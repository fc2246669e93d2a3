use glam::{DVec2, DVec3};

use crate::geometry::{Mesh, SurfacePoint};

use super::Camera;

/// Triangles with a vertex closer than this to the camera plane are skipped.
const NEAR: f64 = 1e-3;

const EMPTY: u32 = u32::MAX;

/// Per-pixel visibility and interpolated surface attributes. Covered pixels
/// are also stored compactly in `points`, in scanline order.
#[derive(Debug, Clone)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
    /// View depth along the camera's forward axis; infinite where uncovered.
    pub depth: Vec<f64>,
    /// Pixel index of each entry of `points`.
    pub covered: Vec<usize>,
    pub points: Vec<SurfacePoint>,
    slot: Vec<u32>,
}

impl GBuffer {
    pub fn covered_count(&self) -> usize {
        self.points.len()
    }

    pub fn point_at(&self, x: usize, y: usize) -> Option<&SurfacePoint> {
        match self.slot[y * self.width + x] {
            EMPTY => None,
            s => Some(&self.points[s as usize]),
        }
    }
}

#[inline]
fn edge(a: DVec2, b: DVec2, p: DVec2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Depth-tested rasterization with perspective-correct barycentrics. Faces are
/// drawn in index order and ties keep the earlier face, so the result is
/// deterministic. Both windings are drawn; frames of back-facing surfaces are
/// flipped toward the camera.
pub fn rasterize(mesh: &Mesh, camera: &Camera) -> GBuffer {
    let (w, h) = (camera.width, camera.height);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut hit: Vec<(u32, DVec3)> = vec![(EMPTY, DVec3::ZERO); w * h];
    let projected: Vec<(DVec2, f64)> = mesh.vertices.iter().map(|&v| camera.project(v)).collect();

    for (fi, f) in mesh.faces.iter().enumerate() {
        let [a, b, c] = f.map(|i| projected[i as usize]);
        if a.1 < NEAR || b.1 < NEAR || c.1 < NEAR {
            continue;
        }
        let area = edge(a.0, b.0, c.0);
        if area.abs() < 1e-14 {
            continue;
        }
        let lo = a.0.min(b.0).min(c.0);
        let hi = a.0.max(b.0).max(c.0);
        let x0 = (lo.x - 0.5).ceil().max(0.0) as usize;
        let y0 = (lo.y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((hi.x - 0.5).floor()).min(w as f64 - 1.0);
        let y1 = ((hi.y - 0.5).floor()).min(h as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let inv_z = DVec3::new(1.0 / a.1, 1.0 / b.1, 1.0 / c.1);
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let p = DVec2::new(x as f64 + 0.5, y as f64 + 0.5);
                let l = DVec3::new(edge(b.0, c.0, p), edge(c.0, a.0, p), edge(a.0, b.0, p)) / area;
                if l.x < 0.0 || l.y < 0.0 || l.z < 0.0 {
                    continue;
                }
                let persp = l * inv_z;
                let s = persp.x + persp.y + persp.z;
                let z = 1.0 / s;
                let i = y * w + x;
                if z < depth[i] {
                    depth[i] = z;
                    hit[i] = (fi as u32, persp / s);
                }
            }
        }
    }

    let mut mask = vec![false; w * h];
    let mut covered = Vec::new();
    let mut points = Vec::new();
    let mut slot = vec![EMPTY; w * h];
    for (i, &(face, bary)) in hit.iter().enumerate() {
        if face == EMPTY {
            continue;
        }
        let mut sp = mesh.surface_point(face as usize, bary);
        if mesh.face_normal(face as usize).dot(camera.position - sp.position) < 0.0 {
            sp.normal = -sp.normal;
            sp.tangent_frame[1] = -sp.tangent_frame[1];
            sp.tangent_frame[2] = -sp.tangent_frame[2];
        }
        mask[i] = true;
        slot[i] = points.len() as u32;
        covered.push(i);
        points.push(sp);
    }
    GBuffer {
        width: w,
        height: h,
        mask,
        depth,
        covered,
        points,
        slot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::uv_sphere;

    fn flat_mesh(tris: &[[DVec3; 3]]) -> Mesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut uvs = Vec::new();
        for t in tris {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(t);
            uvs.extend_from_slice(&[DVec2::ZERO, DVec2::X, DVec2::Y]);
            faces.push([base, base + 1, base + 2]);
        }
        Mesh::from_parts(vertices, faces, uvs, None, false).unwrap()
    }

    fn front_camera(res: usize) -> Camera {
        Camera::new(DVec3::new(0.0, 0.0, 3.0), DVec3::ZERO, DVec3::Y, 1.0, (res, res)).unwrap()
    }

    #[test]
    fn empty_view_has_no_coverage() {
        let mesh = uv_sphere(16, 8);
        let cam = Camera::new(DVec3::new(0.0, 0.0, 3.0), DVec3::new(0.0, 0.0, 6.0), DVec3::Y, 1.0, (32, 32))
            .unwrap();
        let g = rasterize(&mesh, &cam);
        assert!(g.mask.iter().all(|&m| !m));
        assert_eq!(g.covered_count(), 0);
    }

    #[test]
    fn nearer_triangle_wins() {
        let big = |z: f64| [DVec3::new(-50.0, -50.0, z), DVec3::new(50.0, -50.0, z), DVec3::new(0.0, 50.0, z)];
        // Camera at z = 3: the triangle at z = 0.5 is the occluder.
        for (tris, near_face) in [([big(0.0), big(0.5)], 1), ([big(0.5), big(0.0)], 0)] {
            let g = rasterize(&flat_mesh(&tris), &front_camera(16));
            assert!(g.mask.iter().all(|&m| m));
            assert!(g.points.iter().all(|p| p.face == near_face));
            assert!(g.depth.iter().all(|&d| (d - 2.5).abs() < 1e-9));
        }
    }

    #[test]
    fn sphere_coverage_matches_projected_disc() {
        let mesh = uv_sphere(128, 64);
        let res = 256;
        let (d, fov) = (3.0f64, 1.0f64);
        let cam = Camera::orbit(0.0, 0.0, d, fov, (res, res)).unwrap();
        let g = rasterize(&mesh, &cam);
        // Silhouette half-angle asin(1/d); its tangent in pixel units.
        let half = (1.0 / d).asin().tan() / (0.5 * fov).tan() * res as f64 / 2.0;
        let expected = std::f64::consts::PI * half * half;
        let got = g.covered_count() as f64;
        assert!((got - expected).abs() / expected < 0.03, "{got} vs {expected}");
    }

    #[test]
    fn frames_are_unit_and_barycentrics_valid() {
        let mesh = uv_sphere(32, 16);
        let cam = Camera::orbit(0.4, 0.2, 3.0, 0.9, (64, 64)).unwrap();
        let g = rasterize(&mesh, &cam);
        for p in &g.points {
            assert!((p.normal.length() - 1.0).abs() < 1e-9);
            let b = p.barycentric;
            assert!((b.x + b.y + b.z - 1.0).abs() < 1e-9 && b.min_element() >= -1e-12);
        }
    }

    #[test]
    fn perspective_correct_interpolation_lands_on_the_plane() {
        // A slanted triangle: interpolated positions must lie on the view ray.
        let tris = [[DVec3::new(-1.0, -1.0, -1.0), DVec3::new(1.0, -1.0, 1.0), DVec3::new(0.0, 1.0, 0.0)]];
        let mesh = flat_mesh(&tris);
        let cam = front_camera(32);
        let g = rasterize(&mesh, &cam);
        assert!(g.covered_count() > 50);
        for (&pix, p) in g.covered.iter().zip(&g.points) {
            let dir = cam.ray_direction(pix % 32, pix / 32);
            let to = (p.position - cam.position).normalize();
            assert!(dir.dot(to) > 1.0 - 1e-10);
        }
    }
}
