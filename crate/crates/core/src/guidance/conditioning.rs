use glam::DVec3;

use super::{GuidanceError, ViewHint};
use crate::envlight::PrefilteredLight;
use crate::geometry::Mesh;
use crate::image::{luminance, tonemap_value, Image};
use crate::renderer::{rasterize, shade, Camera, GBuffer, MaterialSample};

/// `(km, kr)` of the three white basis materials: rough dielectric,
/// half-metal, smooth metal.
pub const BASIS_MATERIALS: [(f64, f64); 3] = [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)];

/// Three gray renders of the mesh stacked as RGB, one per basis material.
#[derive(Debug, Clone)]
pub struct ConditioningImage {
    /// Tone-mapped luminance in [0, 1]; uncovered pixels are 0.
    pub image: Image,
    pub camera: Camera,
    pub light: PrefilteredLight,
}

impl ConditioningImage {
    pub fn view(&self) -> ViewHint {
        ViewHint {
            camera: self.camera,
            light: self.light.clone(),
        }
    }
}

pub fn conditioning_image(
    mesh: &Mesh,
    light: &PrefilteredLight,
    camera: &Camera,
) -> Result<ConditioningImage, GuidanceError> {
    camera.validate()?;
    conditioning_from_gbuffer(&rasterize(mesh, camera), light, camera)
}

/// Same as [`conditioning_image`] for an existing rasterization.
pub fn conditioning_from_gbuffer(
    gbuffer: &GBuffer,
    light: &PrefilteredLight,
    camera: &Camera,
) -> Result<ConditioningImage, GuidanceError> {
    let mut image = Image::new(gbuffer.width, gbuffer.height, 3);
    for (c, &(km, kr)) in BASIS_MATERIALS.iter().enumerate() {
        let materials = vec![MaterialSample::new(DVec3::ONE, km, kr); gbuffer.points.len()];
        let pass = shade(gbuffer, &materials, light, camera, 0.0)?;
        for (dst, rgb) in image.data.chunks_exact_mut(3).zip(pass.image.data.chunks_exact(3)) {
            dst[c] = tonemap_value(luminance([rgb[0], rgb[1], rgb[2]]));
        }
    }
    Ok(ConditioningImage {
        image,
        camera: *camera,
        light: light.clone(),
    })
}
