use std::sync::atomic::{AtomicUsize, Ordering};

use glam::DVec3;

use super::{CanonicalSetup, PipelineError, ReferenceSet};
use crate::field::{bake_uv, MaterialMaps};
use crate::geometry::{Mesh, SurfacePoint};
use crate::image::{srgb_decode, Image};
use crate::renderer::{rasterize, Camera, GBuffer, MaterialField, MaterialSample};

/// Fill colour of texels no view sees.
pub const UNCOVERED_COLOR: DVec3 = DVec3::new(1.0, 0.0, 1.0);
/// Relative depth slack of the visibility test.
const DEPTH_BIAS: f64 = 0.02;

/// Colours surface points straight from the reference views.
struct Projector<'a> {
    views: &'a [Image; 4],
    cameras: &'a [Camera; 4],
    gbuffers: Vec<GBuffer>,
    queried: AtomicUsize,
    uncovered: AtomicUsize,
}

impl Projector<'_> {
    /// Pixel colour of `p` in the unoccluded view that sees it most head-on.
    fn color(&self, p: &SurfacePoint) -> Option<DVec3> {
        let mut best: Option<(f64, DVec3)> = None;
        for ((view, cam), gb) in self.views.iter().zip(self.cameras).zip(&self.gbuffers) {
            let facing = p.normal.dot((cam.position - p.position).normalize());
            if facing <= 0.0 || best.is_some_and(|(f, _)| f >= facing) {
                continue;
            }
            let (pix, z) = cam.project(p.position);
            if z <= 0.0 || pix.x < 0.0 || pix.y < 0.0 {
                continue;
            }
            let (x, y) = (pix.x as usize, pix.y as usize);
            if x >= cam.width || y >= cam.height {
                continue;
            }
            let i = y * cam.width + x;
            if !gb.mask[i] || z > gb.depth[i] * (1.0 + DEPTH_BIAS) {
                continue;
            }
            let c = view.pixel(x, y);
            best = Some((facing, DVec3::new(srgb_decode(c[0]), srgb_decode(c[1]), srgb_decode(c[2]))));
        }
        best.map(|(_, c)| c)
    }
}

impl MaterialField for Projector<'_> {
    fn materials(&self, points: &[SurfacePoint]) -> Vec<MaterialSample> {
        self.queried.fetch_add(points.len(), Ordering::Relaxed);
        points
            .iter()
            .map(|p| {
                let kc = self.color(p).unwrap_or_else(|| {
                    self.uncovered.fetch_add(1, Ordering::Relaxed);
                    UNCOVERED_COLOR
                });
                MaterialSample::new(kc, 0.0, 1.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Backprojection {
    pub maps: MaterialMaps,
    /// Fraction of chart texels seen by at least one view.
    pub coverage: f64,
}

/// Bakes the reference views onto the UV atlas: every texel takes the
/// (sRGB-decoded) pixel of the visible view facing it most directly. The
/// result is a diffuse-only material (`km = 0`, `kr = 1`, flat normals);
/// texels no view sees get [`UNCOVERED_COLOR`].
pub fn backproject_baseline(
    mesh: &Mesh,
    refs: &ReferenceSet,
    setup: &CanonicalSetup,
    resolution: usize,
) -> Result<Backprojection, PipelineError> {
    let projector = Projector {
        views: &refs.views,
        cameras: &setup.cameras,
        gbuffers: setup.cameras.iter().map(|c| rasterize(mesh, c)).collect(),
        queried: AtomicUsize::new(0),
        uncovered: AtomicUsize::new(0),
    };
    for (v, c) in refs.views.iter().zip(&setup.cameras) {
        if (v.width, v.height, v.channels) != (c.width, c.height, 3) {
            return Err(PipelineError::Shape(format!(
                "reference {}x{}x{} for a {}x{} camera",
                v.width, v.height, v.channels, c.width, c.height
            )));
        }
    }
    let maps = bake_uv(mesh, &projector, resolution)?;
    let queried = projector.queried.load(Ordering::Relaxed).max(1);
    let coverage = 1.0 - projector.uncovered.load(Ordering::Relaxed) as f64 / queried as f64;
    Ok(Backprojection { maps, coverage })
}
