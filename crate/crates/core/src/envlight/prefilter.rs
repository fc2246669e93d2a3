//! Diffuse irradiance and GGX-prefiltered specular maps.
//!
//! The diffuse map stores the bare cosine integral `int Li (w . n) dw` with
//! no `1/pi`: uniform unit radiance integrates to `pi`. Shading multiplies it
//! by `kc (1 - km)` directly.

use std::f64::consts::PI;
use std::sync::Arc;

use glam::DVec3;
use rayon::prelude::*;

use crate::image::Image;
use crate::math::{cosine_hemisphere, ggx_half_vector, hammersley, reflect, rotate_y, to_world};
use crate::renderer::brdf::{alpha_from_roughness, geometric_smith, ggx_distribution};

use super::{
    dir_to_uv, sample_bilinear, sample_direction_grad, texel_direction, BrdfLut, EnvironmentLight,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PrefilterSettings {
    /// Width of the irradiance map (height is half).
    pub irradiance_width: usize,
    pub irradiance_samples: u32,
    pub specular_mips: usize,
    /// Upper bound on the width of specular mip 0.
    pub specular_max_width: usize,
    pub specular_samples: u32,
    pub lut_res: usize,
    pub lut_samples: u32,
}

impl Default for PrefilterSettings {
    fn default() -> Self {
        Self {
            irradiance_width: 32,
            irradiance_samples: 2048,
            specular_mips: 6,
            specular_max_width: 256,
            specular_samples: 512,
            lut_res: 64,
            lut_samples: 1024,
        }
    }
}

/// Box-filtered copies of the radiance map used to pre-blur importance
/// samples according to their footprint.
struct SourcePyramid {
    levels: Vec<Image>,
    /// Average solid angle of a level-0 texel.
    texel_solid_angle: f64,
}

impl SourcePyramid {
    fn new(base: &Image) -> Self {
        let mut levels = vec![base.clone()];
        while levels.last().is_some_and(|l| l.width >= 16 && l.height >= 2) {
            let prev = levels.last().unwrap();
            let (w, h) = (prev.width / 2, prev.height / 2);
            let mut next = Image::new(w, h, 3);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..3 {
                        let s = prev.pixel(2 * x, 2 * y)[c]
                            + prev.pixel(2 * x + 1, 2 * y)[c]
                            + prev.pixel(2 * x, 2 * y + 1)[c]
                            + prev.pixel(2 * x + 1, 2 * y + 1)[c];
                        next.pixel_mut(x, y)[c] = 0.25 * s;
                    }
                }
            }
            levels.push(next);
        }
        let texel_solid_angle = 4.0 * PI / base.pixel_count() as f64;
        Self {
            levels,
            texel_solid_angle,
        }
    }

    fn sample(&self, d: DVec3, lod: f64) -> DVec3 {
        let uv = dir_to_uv(d);
        let max = (self.levels.len() - 1) as f64;
        let lod = lod.clamp(0.0, max);
        let l0 = lod.floor() as usize;
        let t = lod - l0 as f64;
        let a = sample_bilinear(&self.levels[l0], uv);
        if t == 0.0 {
            return a;
        }
        a * (1.0 - t) + sample_bilinear(&self.levels[l0 + 1], uv) * t
    }

    fn lod_for_pdf(&self, pdf: f64, samples: u32) -> f64 {
        let sample_solid_angle = 1.0 / (samples as f64 * pdf.max(1e-12));
        0.5 * (sample_solid_angle / self.texel_solid_angle).log2() + 1.0
    }
}

fn fill_map(width: usize, f: impl Fn(DVec3) -> DVec3 + Sync) -> Image {
    let height = width / 2;
    let mut img = Image::new(width, height, 3);
    img.data
        .par_chunks_mut(width * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..width {
                let v = f(texel_direction(x, y, width, height));
                row[x * 3..x * 3 + 3].copy_from_slice(&v.to_array());
            }
        });
    img
}

fn irradiance_from_pyramid(pyr: &SourcePyramid, n: DVec3, samples: u32) -> DVec3 {
    let mut acc = DVec3::ZERO;
    for s in 0..samples {
        let local = cosine_hemisphere(hammersley(s, samples));
        let pdf = local.z / PI;
        let lod = pyr.lod_for_pdf(pdf, samples);
        acc += pyr.sample(to_world(local, n), lod);
    }
    // Cosine-weighted estimator of int Li cos: pi * mean(Li).
    acc * (PI / samples as f64)
}

/// Cosine-convolved environment (`width x width/2`), including the light's
/// rotation and intensity scale.
pub fn compute_irradiance(light: &EnvironmentLight, width: usize, samples: u32) -> Image {
    let pyr = SourcePyramid::new(light.radiance());
    fill_map(width, |n| {
        light.intensity_scale * irradiance_from_pyramid(&pyr, rotate_y(n, -light.rotation), samples)
    })
}

fn specular_from_pyramid(pyr: &SourcePyramid, r: DVec3, kr: f64, samples: u32) -> DVec3 {
    let alpha = alpha_from_roughness(kr);
    let (n, v) = (r, r);
    let mut acc = DVec3::ZERO;
    let mut weight = 0.0;
    for s in 0..samples {
        let h = to_world(ggx_half_vector(hammersley(s, samples), alpha), n);
        let l = reflect(v, h);
        let n_dot_l = n.dot(l);
        if n_dot_l <= 0.0 {
            continue;
        }
        // With n = v the reflected-direction pdf reduces to D / 4 and the
        // lobe D G / 4 leaves the masking term as the sample weight.
        let pdf = ggx_distribution(n.dot(h), kr) * 0.25;
        let g = geometric_smith(1.0, n_dot_l, kr);
        acc += pyr.sample(l, pyr.lod_for_pdf(pdf, samples)) * g;
        weight += g;
    }
    if weight > 0.0 {
        acc / weight
    } else {
        pyr.sample(r, 0.0)
    }
}

/// Specular mip chain: mip `k` holds the GGX-weighted convolution for
/// roughness `k / (mip_count - 1)`; mip 0 is the resampled radiance.
pub fn prefilter_specular(
    light: &EnvironmentLight,
    mip_count: usize,
    max_width: usize,
    samples: u32,
) -> Vec<Image> {
    assert!(mip_count >= 2, "need at least two specular mips");
    let pyr = SourcePyramid::new(light.radiance());
    let base_width = light.width().min(max_width.max(16));
    let rot = light.rotation;
    let scale = light.intensity_scale;
    (0..mip_count)
        .map(|k| {
            let width = (base_width >> k).max(16);
            if k == 0 {
                fill_map(width, |d| scale * pyr.sample(rotate_y(d, -rot), 0.0))
            } else {
                let kr = k as f64 / (mip_count - 1) as f64;
                fill_map(width, |d| {
                    scale * specular_from_pyramid(&pyr, rotate_y(d, -rot), kr, samples)
                })
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct PrefilteredMaps {
    pub irradiance: Image,
    pub specular_mips: Vec<Image>,
    pub brdf_lut: Arc<BrdfLut>,
}

/// Split-sum lighting products for one environment, shared behind an `Arc`
/// and looked up with a lazily applied rotation and scale.
#[derive(Debug, Clone)]
pub struct PrefilteredLight {
    maps: Arc<PrefilteredMaps>,
    pub rotation: f64,
    pub scale: f64,
}

/// Derivative of `rotate_y(n, -rotation)` applied to a Jacobian: returns
/// `d value / d n` from `d value / d q` where `q` is the rotated direction.
fn unrotate_jacobian(jq: [DVec3; 3], rotation: f64) -> [DVec3; 3] {
    let (s, c) = (-rotation).sin_cos();
    [jq[0] * c - jq[2] * s, jq[1], jq[0] * s + jq[2] * c]
}

impl PrefilteredLight {
    pub fn build(light: &EnvironmentLight, settings: &PrefilterSettings) -> Self {
        let lut = Arc::new(BrdfLut::integrate(settings.lut_res, settings.lut_samples));
        Self::build_with_lut(light, settings, lut)
    }

    /// Prefilters the untransformed radiance and keeps the light's rotation
    /// and scale as lookup parameters.
    pub fn build_with_lut(
        light: &EnvironmentLight,
        settings: &PrefilterSettings,
        brdf_lut: Arc<BrdfLut>,
    ) -> Self {
        let base = light.untransformed();
        let irradiance =
            compute_irradiance(&base, settings.irradiance_width, settings.irradiance_samples);
        let specular_mips = prefilter_specular(
            &base,
            settings.specular_mips,
            settings.specular_max_width,
            settings.specular_samples,
        );
        Self {
            maps: Arc::new(PrefilteredMaps {
                irradiance,
                specular_mips,
                brdf_lut,
            }),
            rotation: light.rotation,
            scale: light.intensity_scale,
        }
    }

    pub fn maps(&self) -> &PrefilteredMaps {
        &self.maps
    }

    pub fn brdf_lut(&self) -> &BrdfLut {
        &self.maps.brdf_lut
    }

    /// Same maps with an additional rotation and scale.
    pub fn transformed(&self, rotation: f64, scale: f64) -> Self {
        Self {
            maps: Arc::clone(&self.maps),
            rotation: self.rotation + rotation,
            scale: self.scale * scale,
        }
    }

    pub fn irradiance(&self, n: DVec3) -> DVec3 {
        self.scale * sample_bilinear(&self.maps.irradiance, dir_to_uv(rotate_y(n, -self.rotation)))
    }

    pub fn irradiance_grad(&self, n: DVec3) -> (DVec3, [DVec3; 3]) {
        let (v, jq) = sample_direction_grad(&self.maps.irradiance, rotate_y(n, -self.rotation));
        let j = unrotate_jacobian(jq, self.rotation);
        (v * self.scale, j.map(|c| c * self.scale))
    }

    fn mip_position(&self, kr: f64) -> (usize, f64) {
        let top = (self.maps.specular_mips.len() - 1) as f64;
        let f = kr.clamp(0.0, 1.0) * top;
        let k0 = (f.floor() as usize).min(self.maps.specular_mips.len() - 2);
        (k0, f - k0 as f64)
    }

    /// Prefiltered radiance around reflection direction `r` for roughness
    /// `kr`, linearly interpolated between neighbouring mips.
    pub fn specular(&self, r: DVec3, kr: f64) -> DVec3 {
        let (k0, t) = self.mip_position(kr);
        let uv = dir_to_uv(rotate_y(r, -self.rotation));
        let mips = &self.maps.specular_mips;
        let a = sample_bilinear(&mips[k0], uv);
        let b = sample_bilinear(&mips[k0 + 1], uv);
        self.scale * (a * (1.0 - t) + b * t)
    }

    /// Specular value, its Jacobian with respect to `r`, and its derivative
    /// with respect to `kr`.
    pub fn specular_grad(&self, r: DVec3, kr: f64) -> (DVec3, [DVec3; 3], DVec3) {
        let (k0, t) = self.mip_position(kr);
        let q = rotate_y(r, -self.rotation);
        let mips = &self.maps.specular_mips;
        let (a, ja) = sample_direction_grad(&mips[k0], q);
        let (b, jb) = sample_direction_grad(&mips[k0 + 1], q);
        let value = a * (1.0 - t) + b * t;
        let jq = [0, 1, 2].map(|k| ja[k] * (1.0 - t) + jb[k] * t);
        let j = unrotate_jacobian(jq, self.rotation);
        let d_kr = if (0.0..=1.0).contains(&kr) {
            (b - a) * (mips.len() - 1) as f64
        } else {
            DVec3::ZERO
        };
        (value * self.scale, j.map(|c| c * self.scale), d_kr * self.scale)
    }
}
