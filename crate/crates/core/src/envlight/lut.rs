//! Split-sum BRDF integration table.

use glam::{DVec2, DVec3};

use crate::math::{ggx_half_vector, hammersley};
use crate::renderer::brdf::{alpha_from_roughness, geometric_smith};

/// Smallest `n.v` the table is evaluated at; the grazing column is clamped
/// here so entries stay finite.
pub const MIN_N_DOT_V: f64 = 1e-4;

/// Table of `(A, B)` with `specular ~= prefiltered * (F0 * A + B)`.
///
/// Entry `(i, j)` holds `n.v = i / (res - 1)` and roughness `j / (res - 1)`;
/// lookups interpolate bilinearly between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct BrdfLut {
    pub res: usize,
    /// Row-major by roughness: `data[j * res + i]`.
    pub data: Vec<DVec2>,
}

impl BrdfLut {
    /// Integrates the table with `samples` GGX-distributed Hammersley points
    /// per entry. Fully deterministic.
    pub fn integrate(res: usize, samples: u32) -> BrdfLut {
        assert!(res >= 2, "lut needs at least 2 entries per axis");
        let mut data = Vec::with_capacity(res * res);
        for j in 0..res {
            let kr = j as f64 / (res - 1) as f64;
            for i in 0..res {
                let nv = (i as f64 / (res - 1) as f64).max(MIN_N_DOT_V);
                data.push(integrate_entry(nv, kr, samples));
            }
        }
        BrdfLut { res, data }
    }

    fn coords(&self, n_dot_v: f64, kr: f64) -> (usize, usize, f64, usize, usize, f64) {
        let scale = (self.res - 1) as f64;
        let fx = n_dot_v.clamp(0.0, 1.0) * scale;
        let fy = kr.clamp(0.0, 1.0) * scale;
        let x0 = (fx.floor() as usize).min(self.res - 2);
        let y0 = (fy.floor() as usize).min(self.res - 2);
        (x0, x0 + 1, fx - x0 as f64, y0, y0 + 1, fy - y0 as f64)
    }

    pub fn lookup(&self, n_dot_v: f64, kr: f64) -> DVec2 {
        self.lookup_grad(n_dot_v, kr).0
    }

    /// Value plus derivatives with respect to `n_dot_v` and `kr`. Outside
    /// [0, 1] the inputs are clamped and the matching derivative is zero.
    pub fn lookup_grad(&self, n_dot_v: f64, kr: f64) -> (DVec2, DVec2, DVec2) {
        let (x0, x1, tx, y0, y1, ty) = self.coords(n_dot_v, kr);
        let at = |x: usize, y: usize| self.data[y * self.res + x];
        let (c00, c10, c01, c11) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        let value = (c00 * (1.0 - tx) + c10 * tx) * (1.0 - ty) + (c01 * (1.0 - tx) + c11 * tx) * ty;
        let scale = (self.res - 1) as f64;
        let inside = |v: f64| (0.0..=1.0).contains(&v);
        let d_nv = if inside(n_dot_v) {
            ((c10 - c00) * (1.0 - ty) + (c11 - c01) * ty) * scale
        } else {
            DVec2::ZERO
        };
        let d_kr = if inside(kr) {
            ((c01 - c00) * (1.0 - tx) + (c11 - c10) * tx) * scale
        } else {
            DVec2::ZERO
        };
        (value, d_nv, d_kr)
    }
}

fn integrate_entry(n_dot_v: f64, kr: f64, samples: u32) -> DVec2 {
    let alpha = alpha_from_roughness(kr);
    let v = DVec3::new((1.0 - n_dot_v * n_dot_v).max(0.0).sqrt(), 0.0, n_dot_v);
    let mut acc = DVec2::ZERO;
    for s in 0..samples {
        let h = ggx_half_vector(hammersley(s, samples), alpha);
        let v_dot_h = v.dot(h);
        let l = 2.0 * v_dot_h * h - v;
        let n_dot_l = l.z;
        let n_dot_h = h.z;
        if n_dot_l > 0.0 && v_dot_h > 0.0 && n_dot_h > 0.0 {
            let g = geometric_smith(n_dot_v, n_dot_l, kr);
            let g_vis = g * v_dot_h / (n_dot_h * n_dot_v);
            let fc = (1.0 - v_dot_h).powi(5);
            acc += DVec2::new((1.0 - fc) * g_vis, fc * g_vis);
        }
    }
    acc / samples as f64
}
