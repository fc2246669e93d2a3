use std::f64::consts::TAU;

use super::{CanonicalSetup, PipelineError};
use crate::envlight::PrefilteredLight;
use crate::geometry::Mesh;
use crate::renderer::{render, Camera, MaterialField, RenderedImage};

/// Renders `frames` views at evenly spaced azimuths on the equator, starting
/// at the first canonical view, under a fixed light.
pub fn turntable(
    mesh: &Mesh,
    field: &dyn MaterialField,
    light: &PrefilteredLight,
    setup: &CanonicalSetup,
    frames: usize,
) -> Result<Vec<RenderedImage>, PipelineError> {
    (0..frames)
        .map(|k| {
            let az = TAU * k as f64 / frames as f64;
            let cam = Camera::orbit(az, 0.0, setup.distance, setup.fov_y, (setup.resolution, setup.resolution))?;
            Ok(render(mesh, field, light, &cam)?)
        })
        .collect()
}

/// Renders the four canonical views of `field` under `light`.
pub fn render_canonical(
    mesh: &Mesh,
    field: &dyn MaterialField,
    light: &PrefilteredLight,
    setup: &CanonicalSetup,
) -> Result<Vec<RenderedImage>, PipelineError> {
    setup
        .cameras
        .iter()
        .map(|cam| Ok(render(mesh, field, light, cam)?))
        .collect()
}
