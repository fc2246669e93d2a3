use glam::DVec3;

use crate::geometry::SurfacePoint;
use crate::renderer::{MaterialField, MaterialSample};

/// Smooth procedural material used as ground truth in recovery experiments:
/// slowly varying colour, a metal/dielectric blend and moderate roughness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticMaterial {
    /// Spatial frequency multiplier.
    pub frequency: f64,
}

impl Default for SyntheticMaterial {
    fn default() -> Self {
        Self { frequency: 1.0 }
    }
}

impl SyntheticMaterial {
    pub fn at(&self, p: DVec3) -> MaterialSample {
        let q = p * self.frequency;
        let kc = DVec3::new(
            0.55 + 0.3 * (2.5 * q.x + 0.3).sin(),
            0.45 + 0.3 * (2.1 * q.y + 1.7).sin(),
            0.4 + 0.25 * (2.3 * q.z + 2.9).sin(),
        );
        let km = 0.5 + 0.45 * (2.0 * q.x + 1.3 * q.y).sin();
        let kr = 0.5 + 0.15 * (2.7 * q.z - 1.1 * q.x).cos();
        MaterialSample::new(kc, km, kr)
    }
}

impl MaterialField for SyntheticMaterial {
    fn materials(&self, points: &[SurfacePoint]) -> Vec<MaterialSample> {
        points.iter().map(|p| self.at(p.position)).collect()
    }
}
