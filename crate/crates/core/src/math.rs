//! Low-discrepancy sequences, hemisphere warps and frame helpers.

use std::f64::consts::PI;

use glam::{DVec2, DVec3};

/// Point `i` of an `n`-point Hammersley set in [0, 1)².
#[inline]
pub fn hammersley(i: u32, n: u32) -> DVec2 {
    DVec2::new(
        (i as f64 + 0.5) / n as f64,
        i.reverse_bits() as f64 * (1.0 / 4_294_967_296.0),
    )
}

/// Orthonormal basis `(t, b)` completing the unit vector `n`.
#[inline]
pub fn basis(n: DVec3) -> (DVec3, DVec3) {
    n.any_orthonormal_pair()
}

#[inline]
pub fn to_world(local: DVec3, n: DVec3) -> DVec3 {
    let (t, b) = basis(n);
    t * local.x + b * local.y + n * local.z
}

/// Cosine-weighted hemisphere direction around +Z (pdf = cos / pi).
#[inline]
pub fn cosine_hemisphere(u: DVec2) -> DVec3 {
    let r = u.x.sqrt();
    let phi = 2.0 * PI * u.y;
    DVec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u.x).max(0.0).sqrt())
}

/// GGX-distributed half vector around +Z for width `alpha` (pdf = D * cos).
#[inline]
pub fn ggx_half_vector(u: DVec2, alpha: f64) -> DVec3 {
    let a2 = alpha * alpha;
    let phi = 2.0 * PI * u.y;
    let cos2 = (1.0 - u.x) / (1.0 + (a2 - 1.0) * u.x);
    let cos_t = cos2.max(0.0).sqrt();
    let sin_t = (1.0 - cos2).max(0.0).sqrt();
    DVec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}

/// Mirror `v` about `n`: `2 (n.v) n - v`.
#[inline]
pub fn reflect(v: DVec3, n: DVec3) -> DVec3 {
    2.0 * n.dot(v) * n - v
}

/// Rotation of `d` by `angle` radians about +Y (increases azimuth).
#[inline]
pub fn rotate_y(d: DVec3, angle: f64) -> DVec3 {
    let (s, c) = angle.sin_cos();
    DVec3::new(d.x * c + d.z * s, d.y, -d.x * s + d.z * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_y_adds_azimuth() {
        let d = DVec3::new(0.0, 0.3, 1.0);
        let r = rotate_y(d, PI / 2.0);
        assert!((r - DVec3::new(1.0, 0.3, 0.0)).length() < 1e-12);
    }

    #[test]
    fn hammersley_in_unit_square() {
        for i in 0..64 {
            let p = hammersley(i, 64);
            assert!((0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y));
        }
    }
}
