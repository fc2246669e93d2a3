use super::schedule::{LightChoice, ViewSpec};
use super::PipelineError;
use crate::envlight::PrefilteredLight;
use crate::geometry::Mesh;
use crate::renderer::Camera;

pub const DEFAULT_FOV_Y: f64 = std::f64::consts::FRAC_PI_4;
/// Border left around the mesh's bounding sphere.
pub const FRAME_MARGIN: f64 = 1.1;

/// The four equatorial views and the fixed light they are rendered under.
#[derive(Debug, Clone)]
pub struct CanonicalSetup {
    pub cameras: [Camera; 4],
    pub light: PrefilteredLight,
    pub distance: f64,
    pub fov_y: f64,
    pub resolution: usize,
}

impl CanonicalSetup {
    /// Fits the orbit distance to the mesh's bounding sphere around the
    /// origin.
    pub fn new(mesh: &Mesh, light: PrefilteredLight, resolution: usize) -> Result<Self, PipelineError> {
        let radius = mesh.vertices.iter().map(|v| v.length()).fold(0.0, f64::max).max(1e-6);
        let distance = Camera::fit_distance(DEFAULT_FOV_Y, FRAME_MARGIN * radius);
        let cameras = [0, 1, 2, 3].map(|i| {
            let v = ViewSpec::canonical(i);
            Camera::orbit(v.azimuth, v.elevation, distance, DEFAULT_FOV_Y, (resolution, resolution))
        });
        let mut out = Vec::with_capacity(4);
        for c in cameras {
            out.push(c?);
        }
        Ok(Self {
            cameras: out.try_into().expect("four cameras"),
            light,
            distance,
            fov_y: DEFAULT_FOV_Y,
            resolution,
        })
    }

    pub fn camera_for(&self, view: &ViewSpec) -> Result<Camera, PipelineError> {
        if let Some(i) = view.canonical {
            return Ok(self.cameras[i]);
        }
        Ok(Camera::orbit(
            view.azimuth,
            view.elevation,
            self.distance,
            self.fov_y,
            (self.resolution, self.resolution),
        )?)
    }
}

/// Applies a light choice to the prefiltered pool.
pub fn light_for(choice: &LightChoice, pool: &[PrefilteredLight]) -> Result<PrefilteredLight, PipelineError> {
    let base = pool.get(choice.index).ok_or_else(|| {
        PipelineError::Schedule(format!("light {} not in a pool of {}", choice.index, pool.len()))
    })?;
    Ok(base.transformed(choice.rotation, choice.scale))
}
