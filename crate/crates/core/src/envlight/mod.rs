//! Equirectangular HDR environment lighting and its split-sum
//! precomputation.
//!
//! Directions map to the lat-long plane with +Y up: azimuth
//! `atan2(x, z) / 2pi` gives `u` and polar angle `acos(y) / pi` gives `v`,
//! so row 0 is the zenith.

mod hdr;
mod lut;
mod manifest;
mod prefilter;
pub mod procedural;

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use glam::{DVec2, DVec3};
use thiserror::Error;

use crate::image::Image;
use crate::math::rotate_y;

pub use hdr::{decode_rgbe, encode_rgbe, read_hdr, write_hdr};
pub use lut::BrdfLut;
pub use manifest::{load_light_pool, parse_manifest, ManifestEntry};
pub use prefilter::{
    compute_irradiance, prefilter_specular, PrefilterSettings, PrefilteredLight, PrefilteredMaps,
};

#[derive(Debug, Error)]
pub enum LightError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("unsupported light format: {0}")]
    Format(String),
    #[error("hdr parse error: {0}")]
    Parse(String),
    #[error("invalid radiance at texel ({x}, {y}): {value}")]
    InvalidTexel { x: usize, y: usize, value: f64 },
    #[error("equirectangular map must be 2:1, got {width}x{height}")]
    AspectRatio { width: usize, height: usize },
    #[error("intensity scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

/// Lat-long radiance map with a lazily applied rotation about +Y and an
/// intensity multiplier.
#[derive(Debug, Clone)]
pub struct EnvironmentLight {
    radiance: Arc<Image>,
    pub rotation: f64,
    pub intensity_scale: f64,
}

impl EnvironmentLight {
    pub fn from_image(radiance: Image) -> Result<Self, LightError> {
        if radiance.channels != 3 {
            return Err(LightError::Format(format!(
                "expected 3 channels, got {}",
                radiance.channels
            )));
        }
        if radiance.height * 2 != radiance.width || radiance.height == 0 {
            return Err(LightError::AspectRatio {
                width: radiance.width,
                height: radiance.height,
            });
        }
        for (i, &v) in radiance.data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                let p = i / 3;
                return Err(LightError::InvalidTexel {
                    x: p % radiance.width,
                    y: p / radiance.width,
                    value: v,
                });
            }
        }
        Ok(Self {
            radiance: Arc::new(radiance),
            rotation: 0.0,
            intensity_scale: 1.0,
        })
    }

    /// Tabulates `f(direction)` at texel centers of a `width x width/2` map.
    pub fn from_fn(width: usize, f: impl Fn(DVec3) -> DVec3) -> Result<Self, LightError> {
        let height = width / 2;
        let mut img = Image::new(width, height, 3);
        for y in 0..height {
            for x in 0..width {
                let v = f(texel_direction(x, y, width, height));
                img.pixel_mut(x, y).copy_from_slice(&v.to_array());
            }
        }
        Self::from_image(img)
    }

    pub fn uniform(width: usize, value: f64) -> Self {
        Self::from_fn(width, |_| DVec3::splat(value)).expect("constant light is valid")
    }

    pub fn load(path: &Path) -> Result<Self, LightError> {
        read_hdr(path)
    }

    pub fn width(&self) -> usize {
        self.radiance.width
    }

    pub fn height(&self) -> usize {
        self.radiance.height
    }

    /// The untransformed radiance texels.
    pub fn radiance(&self) -> &Image {
        &self.radiance
    }

    /// Returns a copy whose lookups are rotated by `rotation` (added to the
    /// current rotation) and scaled by `scale` (multiplied in).
    pub fn transformed(&self, rotation: f64, scale: f64) -> Result<Self, LightError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(LightError::NonPositiveScale(scale));
        }
        Ok(Self {
            radiance: Arc::clone(&self.radiance),
            rotation: self.rotation + rotation,
            intensity_scale: self.intensity_scale * scale,
        })
    }

    /// The same radiance with rotation 0 and scale 1.
    pub fn untransformed(&self) -> Self {
        Self {
            radiance: Arc::clone(&self.radiance),
            rotation: 0.0,
            intensity_scale: 1.0,
        }
    }

    /// Radiance arriving from direction `d` with rotation and scale applied.
    pub fn lookup(&self, d: DVec3) -> DVec3 {
        self.intensity_scale * sample_bilinear(&self.radiance, dir_to_uv(rotate_y(d, -self.rotation)))
    }
}

pub fn dir_to_uv(d: DVec3) -> DVec2 {
    let phi = d.x.atan2(d.z);
    let u = (phi / (2.0 * PI)).rem_euclid(1.0);
    let v = d.y.clamp(-1.0, 1.0).acos() / PI;
    DVec2::new(u, v)
}

pub fn uv_to_dir(uv: DVec2) -> DVec3 {
    let phi = 2.0 * PI * uv.x;
    let theta = PI * uv.y;
    DVec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos())
}

pub fn texel_direction(x: usize, y: usize, width: usize, height: usize) -> DVec3 {
    uv_to_dir(DVec2::new(
        (x as f64 + 0.5) / width as f64,
        (y as f64 + 0.5) / height as f64,
    ))
}

#[inline]
fn texel(img: &Image, x: usize, y: usize) -> DVec3 {
    let i = (y * img.width + x) * 3;
    DVec3::new(img.data[i], img.data[i + 1], img.data[i + 2])
}

struct Bilinear {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    tx: f64,
    ty: f64,
    v_clamped: bool,
}

fn bilinear_coords(img: &Image, uv: DVec2) -> Bilinear {
    let (w, h) = (img.width, img.height);
    let fx = uv.x * w as f64 - 0.5;
    let x0f = fx.floor();
    let tx = fx - x0f;
    let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
    let x1 = (x0 + 1) % w;
    let fy_raw = uv.y * h as f64 - 0.5;
    let max_y = (h - 1) as f64;
    let v_clamped = !(0.0..=max_y).contains(&fy_raw);
    let fy = fy_raw.clamp(0.0, max_y);
    let y0 = (fy.floor() as usize).min(h.saturating_sub(2));
    let y1 = (y0 + 1).min(h - 1);
    let ty = fy - y0 as f64;
    Bilinear {
        x0,
        x1,
        y0,
        y1,
        tx,
        ty,
        v_clamped,
    }
}

/// Bilinear lookup with wrap-around in `u` and clamping in `v`.
pub fn sample_bilinear(img: &Image, uv: DVec2) -> DVec3 {
    let b = bilinear_coords(img, uv);
    let c00 = texel(img, b.x0, b.y0);
    let c10 = texel(img, b.x1, b.y0);
    let c01 = texel(img, b.x0, b.y1);
    let c11 = texel(img, b.x1, b.y1);
    (c00 * (1.0 - b.tx) + c10 * b.tx) * (1.0 - b.ty) + (c01 * (1.0 - b.tx) + c11 * b.tx) * b.ty
}

/// Bilinear lookup in direction `d` plus the Jacobian of the RGB value with
/// respect to the components of `d` (`jac[k]` = d value / d d_k).
pub fn sample_direction_grad(img: &Image, d: DVec3) -> (DVec3, [DVec3; 3]) {
    let uv = dir_to_uv(d);
    let b = bilinear_coords(img, uv);
    let c00 = texel(img, b.x0, b.y0);
    let c10 = texel(img, b.x1, b.y0);
    let c01 = texel(img, b.x0, b.y1);
    let c11 = texel(img, b.x1, b.y1);
    let value =
        (c00 * (1.0 - b.tx) + c10 * b.tx) * (1.0 - b.ty) + (c01 * (1.0 - b.tx) + c11 * b.tx) * b.ty;
    let d_du = ((c10 - c00) * (1.0 - b.ty) + (c11 - c01) * b.ty) * img.width as f64;
    let d_dv = if b.v_clamped || b.y0 == b.y1 {
        DVec3::ZERO
    } else {
        ((c01 - c00) * (1.0 - b.tx) + (c11 - c10) * b.tx) * img.height as f64
    };
    let rho2 = d.x * d.x + d.z * d.z;
    let (du_dx, du_dz) = if rho2 > 1e-18 {
        (d.z / (2.0 * PI * rho2), -d.x / (2.0 * PI * rho2))
    } else {
        (0.0, 0.0)
    };
    let s2 = 1.0 - d.y * d.y;
    let dv_dy = if s2 > 1e-18 && d.y.abs() < 1.0 {
        -1.0 / (PI * s2.sqrt())
    } else {
        0.0
    };
    (value, [d_du * du_dx, d_dv * dv_dy, d_du * du_dz])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uv_direction_round_trip() {
        for &(u, v) in &[(0.1, 0.2), (0.7, 0.5), (0.99, 0.9), (0.0, 0.3)] {
            let back = dir_to_uv(uv_to_dir(DVec2::new(u, v)));
            assert!((back - DVec2::new(u, v)).length() < 1e-12);
        }
    }

    #[test]
    fn scale_doubles_constant_light() {
        let env = EnvironmentLight::uniform(32, 1.0).transformed(0.0, 2.0).unwrap();
        for d in [DVec3::X, DVec3::Y, DVec3::new(0.3, -0.5, 0.2).normalize()] {
            assert!((env.lookup(d) - DVec3::splat(2.0)).length() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_scale_rejected() {
        let env = EnvironmentLight::uniform(8, 1.0);
        assert!(matches!(env.transformed(0.0, 0.0), Err(LightError::NonPositiveScale(_))));
        assert!(env.transformed(0.0, -1.0).is_err());
    }

    fn textured_env() -> EnvironmentLight {
        EnvironmentLight::from_fn(64, |d| {
            DVec3::new(1.0 + d.x * 0.5, 1.0 + (3.0 * d.z).sin() * 0.3, 1.5 + d.y)
        })
        .unwrap()
    }

    #[test]
    fn full_turn_rotation_is_identity() {
        let env = textured_env();
        let turned = env.transformed(2.0 * PI, 1.0).unwrap();
        for i in 0..50 {
            let d = uv_to_dir(DVec2::new(i as f64 / 50.0 + 0.003, 0.1 + 0.016 * i as f64));
            assert!((env.lookup(d) - turned.lookup(d)).length() < 1e-5);
        }
    }

    #[test]
    fn rotation_moves_bright_texel_in_azimuth() {
        let (w, h) = (64, 32);
        let mut img = Image::filled(w, h, 3, 0.1);
        // Texel whose center sits at azimuth ~0 on the equator.
        img.pixel_mut(0, h / 2).copy_from_slice(&[50.0, 50.0, 50.0]);
        let env = EnvironmentLight::from_image(img).unwrap().transformed(PI, 1.0).unwrap();
        let theta = PI * (h / 2) as f64 / h as f64 + PI * 0.5 / h as f64;
        let mut best = (0.0, f64::MIN);
        for i in 0..720 {
            let phi = 2.0 * PI * i as f64 / 720.0;
            let d = DVec3::new(theta.sin() * phi.sin(), theta.cos(), theta.sin() * phi.cos());
            let v = env.lookup(d).x;
            if v > best.1 {
                best = (phi, v);
            }
        }
        let bright_az = 2.0 * PI * 0.5 / w as f64;
        assert!((best.0 - (PI + bright_az)).abs() < 2.0 * PI / w as f64, "{}", best.0);
    }

    #[test]
    fn direction_gradient_matches_differences() {
        let env = textured_env();
        let img = env.radiance();
        for &d in &[DVec3::new(0.3, 0.4, 0.8), DVec3::new(-0.6, -0.2, 0.3), DVec3::new(0.1, 0.9, -0.4)] {
            let (_, jac) = sample_direction_grad(img, d);
            for k in 0..3 {
                let h = 1e-7;
                let mut dp = d;
                let mut dm = d;
                dp[k] += h;
                dm[k] -= h;
                let fd = (sample_bilinear(img, dir_to_uv(dp)) - sample_bilinear(img, dir_to_uv(dm))) / (2.0 * h);
                assert!((fd - jac[k]).length() < 1e-5 * (1.0 + fd.length()), "k={k} {fd:?} {:?}", jac[k]);
            }
        }
    }

    #[test]
    fn rejects_bad_texels_and_aspect() {
        let mut img = Image::filled(8, 4, 3, 1.0);
        img.data[5] = -1.0;
        assert!(matches!(EnvironmentLight::from_image(img), Err(LightError::InvalidTexel { .. })));
        let img = Image::filled(8, 8, 3, 1.0);
        assert!(matches!(EnvironmentLight::from_image(img), Err(LightError::AspectRatio { .. })));
        let mut img = Image::filled(8, 4, 3, 1.0);
        img.data[0] = f64::NAN;
        assert!(EnvironmentLight::from_image(img).is_err());
    }
}
