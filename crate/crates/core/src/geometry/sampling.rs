use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, Mesh, SurfacePoint};

/// Draws `count` area-uniform surface points. Deterministic in `seed`.
pub fn sample_surface(
    mesh: &Mesh,
    count: usize,
    seed: u64,
) -> Result<Vec<SurfacePoint>, GeometryError> {
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(GeometryError::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let face = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let bary = DVec3::new(1.0 - s, s * (1.0 - r2), s * r2);
            mesh.surface_point(face, bary)
        })
        .collect();
    Ok(points)
}
