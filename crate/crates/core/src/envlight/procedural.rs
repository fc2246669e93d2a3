//! Synthetic studio environments: a dim gradient dome plus a few soft
//! rectangular-ish area lights modelled as Gaussian lobes on the sphere.

use glam::DVec3;

use super::EnvironmentLight;

#[derive(Debug, Clone, Copy)]
pub struct Softbox {
    pub direction: DVec3,
    /// Angular radius (radians) of the lobe's 1/e falloff.
    pub width: f64,
    pub color: DVec3,
}

impl Softbox {
    fn radiance(&self, d: DVec3) -> DVec3 {
        let cos = d.dot(self.direction).clamp(-1.0, 1.0);
        let angle = cos.acos();
        self.color * (-(angle / self.width).powi(2)).exp()
    }
}

fn dir(azimuth_deg: f64, elevation_deg: f64) -> DVec3 {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    DVec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos())
}

/// Tabulates a studio map of `width x width/2` texels.
pub fn studio(width: usize, ambient: DVec3, boxes: &[Softbox]) -> EnvironmentLight {
    EnvironmentLight::from_fn(width, |d| {
        // Brighter ceiling, darker floor.
        let dome = ambient * (0.6 + 0.4 * d.y);
        boxes.iter().fold(dome, |acc, b| acc + b.radiance(d))
    })
    .expect("procedural radiance is finite and non-negative")
}

/// Six directional indoor setups used when no lighting manifest is given.
/// Map 0 is a frontal key/fill arrangement.
pub fn studio_pool(width: usize) -> Vec<EnvironmentLight> {
    let warm = DVec3::new(1.0, 0.9, 0.75);
    let cool = DVec3::new(0.75, 0.85, 1.0);
    let white = DVec3::ONE;
    let sb = |az, el, w_deg: f64, c: DVec3, k: f64| Softbox {
        direction: dir(az, el),
        width: w_deg.to_radians(),
        color: c * k,
    };
    let setups: [(f64, Vec<Softbox>); 6] = [
        (0.15, vec![sb(30.0, 30.0, 18.0, white, 6.0), sb(-60.0, 10.0, 25.0, white, 1.5)]),
        (0.1, vec![sb(90.0, 20.0, 15.0, warm, 8.0), sb(250.0, 40.0, 20.0, cool, 2.0)]),
        (0.2, vec![sb(0.0, 80.0, 25.0, white, 5.0)]),
        (0.1, vec![sb(160.0, 15.0, 12.0, white, 10.0), sb(20.0, 5.0, 30.0, warm, 1.0)]),
        (0.12, vec![
            sb(-45.0, 35.0, 15.0, cool, 6.0),
            sb(45.0, 35.0, 15.0, warm, 6.0),
            sb(180.0, 60.0, 20.0, white, 2.0),
        ]),
        (0.25, vec![sb(270.0, 0.0, 10.0, white, 12.0)]),
    ];
    setups
        .iter()
        .map(|(amb, boxes)| studio(width, DVec3::splat(*amb), boxes))
        .collect()
}
