//! Rasterization into G-buffers and differentiable split-sum shading.
//!
//! Visibility is treated as constant: gradients flow from pixels to material
//! parameters only, never through silhouettes.

pub mod brdf;
mod camera;
mod raster;
mod shade;

use glam::DVec3;
use rayon::prelude::*;
use thiserror::Error;

use crate::envlight::PrefilteredLight;
use crate::geometry::{Mesh, SurfacePoint};
use crate::image::Image;

pub use camera::Camera;
pub use raster::{rasterize, GBuffer};
pub use shade::{perturbed_normal, shade_point, shade_point_backward, MaterialGrad, MaterialSample};

/// Radiance given to pixels no surface covers.
pub const BACKGROUND: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("expected {expected} materials (one per covered pixel), got {got}")]
    MaterialCount { expected: usize, got: usize },
    #[error("pixel gradient shape {got:?} does not match render {expected:?}")]
    GradientShape {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
}

/// Anything that can assign materials to surface points.
pub trait MaterialField: Sync {
    fn materials(&self, points: &[SurfacePoint]) -> Vec<MaterialSample>;
}

/// Same material everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantMaterial(pub MaterialSample);

impl MaterialField for ConstantMaterial {
    fn materials(&self, points: &[SurfacePoint]) -> Vec<MaterialSample> {
        vec![self.0; points.len()]
    }
}

#[derive(Debug, Clone)]
pub struct RenderedImage {
    /// Linear RGB radiance.
    pub image: Image,
    pub mask: Vec<bool>,
}

fn view_dir(camera: &Camera, p: DVec3) -> DVec3 {
    (camera.position - p).normalize()
}

/// Shades every covered pixel of `gbuffer`; `materials[i]` belongs to
/// `gbuffer.points[i]`. Uncovered pixels are set to `background`.
pub fn shade(
    gbuffer: &GBuffer,
    materials: &[MaterialSample],
    light: &PrefilteredLight,
    camera: &Camera,
    background: f64,
) -> Result<RenderedImage, RenderError> {
    if materials.len() != gbuffer.points.len() {
        return Err(RenderError::MaterialCount {
            expected: gbuffer.points.len(),
            got: materials.len(),
        });
    }
    let colors: Vec<DVec3> = gbuffer
        .points
        .par_iter()
        .zip(materials)
        .map(|(p, m)| shade_point(&p.tangent_frame, view_dir(camera, p.position), m, light))
        .collect();
    let mut image = Image::filled(gbuffer.width, gbuffer.height, 3, background);
    for (&pix, c) in gbuffer.covered.iter().zip(&colors) {
        image.data[pix * 3..pix * 3 + 3].copy_from_slice(&c.to_array());
    }
    Ok(RenderedImage {
        image,
        mask: gbuffer.mask.clone(),
    })
}

/// Material gradients for each covered point given `pixel_grad`, the loss
/// gradient with respect to the rendered radiance.
pub fn shade_backward(
    gbuffer: &GBuffer,
    materials: &[MaterialSample],
    light: &PrefilteredLight,
    camera: &Camera,
    pixel_grad: &Image,
) -> Result<Vec<MaterialGrad>, RenderError> {
    if materials.len() != gbuffer.points.len() {
        return Err(RenderError::MaterialCount {
            expected: gbuffer.points.len(),
            got: materials.len(),
        });
    }
    let shape = (pixel_grad.width, pixel_grad.height, pixel_grad.channels);
    if shape != (gbuffer.width, gbuffer.height, 3) {
        return Err(RenderError::GradientShape {
            expected: (gbuffer.width, gbuffer.height, 3),
            got: shape,
        });
    }
    Ok(gbuffer
        .points
        .par_iter()
        .zip(materials)
        .zip(&gbuffer.covered)
        .map(|((p, m), &pix)| {
            let g = &pixel_grad.data[pix * 3..pix * 3 + 3];
            let view = view_dir(camera, p.position);
            shade_point_backward(&p.tangent_frame, view, m, light, DVec3::new(g[0], g[1], g[2]))
        })
        .collect())
}

/// Rasterizes, queries `field` at the visible surface points and shades.
pub fn render(
    mesh: &Mesh,
    field: &dyn MaterialField,
    light: &PrefilteredLight,
    camera: &Camera,
) -> Result<RenderedImage, RenderError> {
    camera.validate()?;
    let gbuffer = rasterize(mesh, camera);
    let materials = field.materials(&gbuffer.points);
    shade(&gbuffer, &materials, light, camera, BACKGROUND)
}
