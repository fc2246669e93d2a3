//! Reconstruction loss: masked mean squared error plus an L1 distance between
//! Gaussian pyramids of the two images.

use super::PipelineError;
use crate::image::Image;

pub const PYRAMID_LEVELS: usize = 3;
const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconLoss {
    pub l2: f64,
    pub perceptual: f64,
}

impl ReconLoss {
    pub fn total(&self) -> f64 {
        self.l2 + self.perceptual
    }
}

/// Plane of `w x h` values for one channel.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Blur with the 5-tap binomial kernel (edges clamped), then keep every
/// other sample in each direction.
fn reduce(p: &Plane) -> Plane {
    let (w2, h2) = (p.w.div_ceil(2), p.h.div_ceil(2));
    let mut rows = vec![0.0; w2 * p.h];
    for y in 0..p.h {
        for x2 in 0..w2 {
            let cx = 2 * x2 as isize;
            rows[y * w2 + x2] = KERNEL
                .iter()
                .enumerate()
                .map(|(k, kv)| kv * p.v[y * p.w + clamp_index(cx + k as isize - 2, p.w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w2 * h2];
    for y2 in 0..h2 {
        let cy = 2 * y2 as isize;
        for x2 in 0..w2 {
            out[y2 * w2 + x2] = KERNEL
                .iter()
                .enumerate()
                .map(|(k, kv)| kv * rows[clamp_index(cy + k as isize - 2, p.h) * w2 + x2])
                .sum();
        }
    }
    Plane { w: w2, h: h2, v: out }
}

/// Adjoint of [`reduce`] for an input of size `w x h`.
fn reduce_adjoint(g: &Plane, w: usize, h: usize) -> Plane {
    let mut rows = vec![0.0; g.w * h];
    for y2 in 0..g.h {
        let cy = 2 * y2 as isize;
        for x2 in 0..g.w {
            let v = g.v[y2 * g.w + x2];
            for (k, kv) in KERNEL.iter().enumerate() {
                rows[clamp_index(cy + k as isize - 2, h) * g.w + x2] += kv * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x2 in 0..g.w {
            let v = rows[y * g.w + x2];
            let cx = 2 * x2 as isize;
            for (k, kv) in KERNEL.iter().enumerate() {
                out[y * w + clamp_index(cx + k as isize - 2, w)] += kv * v;
            }
        }
    }
    Plane { w, h, v: out }
}

/// Loss between `render` and `reference` over pixels where `mask` is set,
/// with the gradient with respect to `render`. Both terms are averaged per
/// covered sample, so the value does not depend on resolution.
pub fn recon_loss(render: &Image, mask: &[bool], reference: &Image) -> Result<(ReconLoss, Image), PipelineError> {
    if !render.same_shape(reference) || mask.len() != render.pixel_count() {
        return Err(PipelineError::Shape(format!(
            "render {}x{}x{}, reference {}x{}x{}, mask {}",
            render.width,
            render.height,
            render.channels,
            reference.width,
            reference.height,
            reference.channels,
            mask.len()
        )));
    }
    let (w, h, c) = (render.width, render.height, render.channels);
    let mut grad = Image::new(w, h, c);
    let covered = mask.iter().filter(|&&m| m).count();
    if covered == 0 {
        return Ok((ReconLoss::default(), grad));
    }
    let n = (covered * c) as f64;
    let mut diff = vec![0.0; w * h * c];
    let mut l2 = 0.0;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for ch in 0..c {
            let j = i * c + ch;
            let d = render.data[j] - reference.data[j];
            diff[j] = d;
            l2 += d * d;
            grad.data[j] = 2.0 * d / n;
        }
    }
    l2 /= n;

    // The pyramid is linear, so G(x) - G(r) = G(mask * (x - r)).
    let mut perceptual = 0.0;
    for ch in 0..c {
        let base = Plane {
            w,
            h,
            v: (0..w * h).map(|i| diff[i * c + ch]).collect(),
        };
        let mut levels = vec![base];
        for _ in 1..PYRAMID_LEVELS {
            let next = reduce(levels.last().unwrap());
            levels.push(next);
        }
        // Seed each level with d|G_l|/dG_l, then push back to full size.
        let mut acc: Option<Plane> = None;
        for l in (0..PYRAMID_LEVELS).rev() {
            let lv = &levels[l];
            let norm = n / 4f64.powi(l as i32);
            perceptual += lv.v.iter().map(|v| v.abs()).sum::<f64>() / norm;
            let mut g = Plane {
                w: lv.w,
                h: lv.h,
                v: lv.v.iter().map(|&v| v.signum() * (v != 0.0) as u8 as f64 / norm).collect(),
            };
            if let Some(a) = acc.take() {
                for (gv, av) in g.v.iter_mut().zip(&a.v) {
                    *gv += av;
                }
            }
            acc = Some(if l > 0 {
                reduce_adjoint(&g, levels[l - 1].w, levels[l - 1].h)
            } else {
                g
            });
        }
        let full = acc.unwrap();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                grad.data[i * c + ch] += full.v[i];
            }
        }
    }
    Ok((ReconLoss { l2, perceptual }, grad))
}
