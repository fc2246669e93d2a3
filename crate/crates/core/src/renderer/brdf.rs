//! Microfacet terms of the shading model: Schlick Fresnel, GGX normal
//! distribution and height-correlated Smith masking-shadowing.
//!
//! Roughness `kr` is perceptual: the GGX width is `alpha = kr^2`, with `kr`
//! clamped to [`MIN_ROUGHNESS`] so the distribution never collapses to a
//! delta.

use std::f64::consts::PI;

use glam::DVec3;

pub const MIN_ROUGHNESS: f64 = 0.03;

/// Base reflectance of dielectrics in the metalness workflow.
pub const DIELECTRIC_F0: f64 = 0.04;

#[inline]
pub fn alpha_from_roughness(kr: f64) -> f64 {
    let r = kr.clamp(MIN_ROUGHNESS, 1.0);
    r * r
}

/// `F0 = lerp(0.04, kc, km)`.
#[inline]
pub fn base_reflectance(kc: DVec3, km: f64) -> DVec3 {
    DVec3::splat(DIELECTRIC_F0) * (1.0 - km) + kc * km
}

#[inline]
pub fn fresnel_schlick(cos_theta: f64, f0: DVec3) -> DVec3 {
    let m = (1.0 - cos_theta.clamp(0.0, 1.0)).powi(5);
    f0 + (DVec3::ONE - f0) * m
}

#[inline]
pub fn ggx_distribution(n_dot_h: f64, kr: f64) -> f64 {
    let a2 = alpha_from_roughness(kr).powi(2);
    let c = n_dot_h.clamp(0.0, 1.0);
    let d = c * c * (a2 - 1.0) + 1.0;
    a2 / (PI * d * d)
}

/// Blend factor from `n` toward the mirror direction `r` for the specular
/// lookup, and its derivative in `kr`. Rough lobes lean toward the normal.
#[inline]
pub fn dominant_blend(kr: f64) -> (f64, f64) {
    let a = alpha_from_roughness(kr);
    let s = (1.0 - a).sqrt();
    let w = (1.0 - a) * (s + a);
    let dw_da = -1.5 * s + 1.0 - 2.0 * a;
    let da_dkr = if kr > MIN_ROUGHNESS && kr < 1.0 { 2.0 * kr } else { 0.0 };
    (w, dw_da * da_dkr)
}

/// Smith `Lambda` for GGX at cosine `cos_theta`.
#[inline]
fn smith_lambda(cos_theta: f64, a2: f64) -> f64 {
    let c2 = cos_theta * cos_theta;
    let tan2 = (1.0 - c2).max(0.0) / c2;
    0.5 * ((1.0 + a2 * tan2).sqrt() - 1.0)
}

/// Height-correlated masking-shadowing `1 / (1 + Lambda(v) + Lambda(l))`.
#[inline]
pub fn geometric_smith(n_dot_v: f64, n_dot_l: f64, kr: f64) -> f64 {
    if n_dot_v <= 0.0 || n_dot_l <= 0.0 {
        return 0.0;
    }
    let a2 = alpha_from_roughness(kr).powi(2);
    1.0 / (1.0 + smith_lambda(n_dot_v.min(1.0), a2) + smith_lambda(n_dot_l.min(1.0), a2))
}
