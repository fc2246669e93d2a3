//! Split-sum shading of one surface point and its reverse-mode derivative.
//!
//! Diffuse radiance is `kc (1 - km) E(n)` where `E` is the cosine-weighted
//! irradiance without a `1/pi` factor, so a white diffuse surface under unit
//! radiance shades to `pi`. Specular radiance is the prefiltered environment
//! times `F0 A + B` from the BRDF table, looked up along the mirror direction
//! bent toward the normal as roughness grows.

use glam::DVec3;

use crate::envlight::PrefilteredLight;

use super::brdf::{base_reflectance, dominant_blend, DIELECTRIC_F0};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSample {
    pub kc: DVec3,
    pub km: f64,
    pub kr: f64,
    /// Tangent-space normal offset; only `x` and `y` are used.
    pub kn: DVec3,
}

impl MaterialSample {
    pub const fn new(kc: DVec3, km: f64, kr: f64) -> Self {
        Self {
            kc,
            km,
            kr,
            kn: DVec3::ZERO,
        }
    }
}

/// Gradient of a scalar loss with respect to each material parameter.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaterialGrad {
    pub kc: DVec3,
    pub km: f64,
    pub kr: f64,
    pub kn: DVec3,
}

impl MaterialGrad {
    pub fn is_zero(&self) -> bool {
        self.kc == DVec3::ZERO && self.km == 0.0 && self.kr == 0.0 && self.kn == DVec3::ZERO
    }

    /// Packed as `[kc.x, kc.y, kc.z, km, kr, kn.x, kn.y, kn.z]`.
    pub fn to_array(&self) -> [f64; 8] {
        [self.kc.x, self.kc.y, self.kc.z, self.km, self.kr, self.kn.x, self.kn.y, self.kn.z]
    }
}

/// `normalize(T * 0.5 tanh(kn.x) + B * 0.5 tanh(kn.y) + N)` for a frame given
/// as rows `[T, B, N]`.
pub fn perturbed_normal(frame: &[DVec3; 3], kn: DVec3) -> DVec3 {
    (frame[0] * (0.5 * kn.x.tanh()) + frame[1] * (0.5 * kn.y.tanh()) + frame[2]).normalize()
}

/// Outgoing radiance toward the unit vector `view` (surface to eye).
pub fn shade_point(frame: &[DVec3; 3], view: DVec3, m: &MaterialSample, light: &PrefilteredLight) -> DVec3 {
    let n = perturbed_normal(frame, m.kn);
    let n_dot_v = n.dot(view);
    let r = 2.0 * n_dot_v * n - view;
    let (w, _) = dominant_blend(m.kr);
    let d = (n + w * (r - n)).normalize();
    let ab = light.brdf_lut().lookup(n_dot_v, m.kr);
    let f0 = base_reflectance(m.kc, m.km);
    m.kc * (1.0 - m.km) * light.irradiance(n) + light.specular(d, m.kr) * (f0 * ab.x + DVec3::splat(ab.y))
}

/// Pulls `upstream` (d loss / d radiance) back to the material parameters.
pub fn shade_point_backward(
    frame: &[DVec3; 3],
    view: DVec3,
    m: &MaterialSample,
    light: &PrefilteredLight,
    upstream: DVec3,
) -> MaterialGrad {
    if upstream == DVec3::ZERO {
        return MaterialGrad::default();
    }
    let [t, b, n0] = *frame;
    let (tx, ty) = (m.kn.x.tanh(), m.kn.y.tanh());
    let raw = t * (0.5 * tx) + b * (0.5 * ty) + n0;
    let len = raw.length();
    let n = raw / len;
    let n_dot_v = n.dot(view);
    let r = 2.0 * n_dot_v * n - view;
    let (w, w_kr) = dominant_blend(m.kr);
    let d_raw = n + w * (r - n);
    let d_len = d_raw.length();
    let d = d_raw / d_len;

    let (e, je) = light.irradiance_grad(n);
    let (s, js, s_kr) = light.specular_grad(d, m.kr);
    let (ab, ab_nv, ab_kr) = light.brdf_lut().lookup_grad(n_dot_v, m.kr);
    let f0 = base_reflectance(m.kc, m.km);
    let spec = f0 * ab.x + DVec3::splat(ab.y);
    let g = upstream;

    let kc = g * e * (1.0 - m.km) + g * s * ab.x * m.km;
    let km = (g * (-m.kc * e + s * ab.x * (m.kc - DVec3::splat(DIELECTRIC_F0)))).element_sum();
    let gd = g * m.kc * (1.0 - m.km);
    let gs = g * spec;
    let g_d = DVec3::new(gs.dot(js[0]), gs.dot(js[1]), gs.dot(js[2]));
    let g_draw = (g_d - d * d.dot(g_d)) / d_len;
    let kr = (g * s_kr * spec).element_sum()
        + (g * s * (f0 * ab_kr.x + DVec3::splat(ab_kr.y))).element_sum()
        + g_draw.dot(r - n) * w_kr;

    let mut g_n = DVec3::new(gd.dot(je[0]), gd.dot(je[1]), gd.dot(je[2])) + (1.0 - w) * g_draw;
    let g_r = w * g_draw;
    let g_nv = (g * s).dot(f0 * ab_nv.x + DVec3::splat(ab_nv.y));
    g_n += 2.0 * view * g_r.dot(n) + 2.0 * n_dot_v * g_r + g_nv * view;
    let g_raw = (g_n - n * n.dot(g_n)) / len;
    let kn = DVec3::new(
        g_raw.dot(t) * 0.5 * (1.0 - tx * tx),
        g_raw.dot(b) * 0.5 * (1.0 - ty * ty),
        0.0,
    );
    MaterialGrad { kc, km, kr, kn }
}
