use glam::{DVec2, DVec3};

use super::RenderError;

/// Pinhole camera. Pixel `(x, y)` covers `[x, x+1) x [y, y+1)` in screen
/// space with `y` growing downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    pub target: DVec3,
    pub up: DVec3,
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(
        position: DVec3,
        target: DVec3,
        up: DVec3,
        fov_y: f64,
        resolution: (usize, usize),
    ) -> Result<Self, RenderError> {
        let cam = Camera {
            position,
            target,
            up,
            fov_y,
            width: resolution.0,
            height: resolution.1,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera on a sphere of radius `distance` around the origin, looking at
    /// it. Azimuth 0 sits on +Z and grows toward +X; elevation is measured
    /// from the equator.
    pub fn orbit(
        azimuth: f64,
        elevation: f64,
        distance: f64,
        fov_y: f64,
        resolution: (usize, usize),
    ) -> Result<Self, RenderError> {
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        let position = DVec3::new(ce * sa, se, ce * ca) * distance;
        Self::new(position, DVec3::ZERO, DVec3::Y, fov_y, resolution)
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidCamera(m.to_string()));
        if !self.position.is_finite() || !self.target.is_finite() || !self.up.is_finite() {
            return bad("non-finite camera vectors");
        }
        if (self.target - self.position).length() < 1e-12 {
            return bad("position equals target");
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return bad("fov_y must lie in (0, pi)");
        }
        if self.width == 0 || self.height == 0 {
            return bad("empty resolution");
        }
        if (self.target - self.position).normalize().cross(self.up).length() < 1e-9 {
            return bad("up vector parallel to view direction");
        }
        Ok(())
    }

    /// `(right, up, forward)` orthonormal frame.
    pub fn frame(&self) -> (DVec3, DVec3, DVec3) {
        let f = (self.target - self.position).normalize();
        let r = f.cross(self.up).normalize();
        (r, r.cross(f), f)
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// Projects `p` to continuous pixel coordinates and view depth along the
    /// forward axis.
    pub fn project(&self, p: DVec3) -> (DVec2, f64) {
        let (r, u, f) = self.frame();
        let d = p - self.position;
        let z = d.dot(f);
        let t = (0.5 * self.fov_y).tan();
        let sx = d.dot(r) / (z * t * self.aspect());
        let sy = d.dot(u) / (z * t);
        (
            DVec2::new(
                (sx + 1.0) * 0.5 * self.width as f64,
                (1.0 - sy) * 0.5 * self.height as f64,
            ),
            z,
        )
    }

    /// Unit ray direction through the center of pixel `(x, y)`.
    pub fn ray_direction(&self, x: usize, y: usize) -> DVec3 {
        let (r, u, f) = self.frame();
        let t = (0.5 * self.fov_y).tan();
        let sx = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * t * self.aspect();
        let sy = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * t;
        (f + r * sx + u * sy).normalize()
    }

    /// Orbit distance at which a unit sphere fills the vertical field of view
    /// with a relative `margin` (> 1 leaves a border).
    pub fn fit_distance(fov_y: f64, margin: f64) -> f64 {
        margin / (0.5 * fov_y).sin()
    }
}
