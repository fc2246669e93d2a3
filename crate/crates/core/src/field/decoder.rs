//! Two-layer MLP from encoded features to material parameters.
//!
//! Parameters are stored flat as `W1 (hidden x input), b1, W2 (8 x hidden),
//! b2`. Outputs 0..5 (kc, km, kr) go through a sigmoid, 5..8 (kn) are raw.

use glam::DVec3;

use crate::renderer::MaterialSample;

pub const OUTPUTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderShape {
    pub input: usize,
    pub hidden: usize,
}

impl DecoderShape {
    pub fn param_count(&self) -> usize {
        self.hidden * self.input + self.hidden + OUTPUTS * self.hidden + OUTPUTS
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = p.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(OUTPUTS * self.hidden);
        (w1, b1, w2, b2)
    }

    fn split_mut<'a>(&self, p: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64], &'a mut [f64]) {
        let (w1, rest) = p.split_at_mut(self.hidden * self.input);
        let (b1, rest) = rest.split_at_mut(self.hidden);
        let (w2, b2) = rest.split_at_mut(OUTPUTS * self.hidden);
        (w1, b1, w2, b2)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hidden pre-activations and raw outputs for one feature vector.
pub fn forward_raw(shape: &DecoderShape, params: &[f64], feature: &[f64], hidden: &mut [f64]) -> [f64; OUTPUTS] {
    let (w1, b1, w2, b2) = shape.split(params);
    for (j, h) in hidden.iter_mut().enumerate() {
        let row = &w1[j * shape.input..(j + 1) * shape.input];
        *h = b1[j] + row.iter().zip(feature).map(|(w, f)| w * f).sum::<f64>();
    }
    let mut out = [0.0; OUTPUTS];
    for (o, v) in out.iter_mut().enumerate() {
        let row = &w2[o * shape.hidden..(o + 1) * shape.hidden];
        *v = b2[o] + row.iter().zip(hidden.iter()).map(|(w, &h)| w * h.max(0.0)).sum::<f64>();
    }
    out
}

pub fn to_material(raw: &[f64; OUTPUTS]) -> MaterialSample {
    MaterialSample {
        kc: DVec3::new(sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])),
        km: sigmoid(raw[3]),
        kr: sigmoid(raw[4]),
        kn: DVec3::new(raw[5], raw[6], raw[7]),
    }
}

pub fn decode(shape: &DecoderShape, params: &[f64], feature: &[f64]) -> MaterialSample {
    let mut hidden = vec![0.0; shape.hidden];
    to_material(&forward_raw(shape, params, feature, &mut hidden))
}

/// Backpropagates `g_material` (gradient w.r.t. the 8 decoded values) for one
/// feature vector. Adds into `g_params` and overwrites `g_feature`.
pub fn backward(
    shape: &DecoderShape,
    params: &[f64],
    feature: &[f64],
    g_material: &[f64; OUTPUTS],
    hidden: &mut [f64],
    g_params: &mut [f64],
    g_feature: &mut [f64],
) {
    let raw = forward_raw(shape, params, feature, hidden);
    let mut g_raw = *g_material;
    for o in 0..5 {
        let s = sigmoid(raw[o]);
        g_raw[o] *= s * (1.0 - s);
    }
    let (w1, _, w2, _) = shape.split(params);
    let (gw1, gb1, gw2, gb2) = shape.split_mut(g_params);
    g_feature.fill(0.0);
    for o in 0..OUTPUTS {
        gb2[o] += g_raw[o];
        if g_raw[o] == 0.0 {
            continue;
        }
        let row = &mut gw2[o * shape.hidden..(o + 1) * shape.hidden];
        for (g, &h) in row.iter_mut().zip(hidden.iter()) {
            *g += g_raw[o] * h.max(0.0);
        }
    }
    for j in 0..shape.hidden {
        if hidden[j] <= 0.0 {
            continue;
        }
        let g_h: f64 = (0..OUTPUTS).map(|o| g_raw[o] * w2[o * shape.hidden + j]).sum();
        if g_h == 0.0 {
            continue;
        }
        gb1[j] += g_h;
        let wrow = &w1[j * shape.input..(j + 1) * shape.input];
        let grow = &mut gw1[j * shape.input..(j + 1) * shape.input];
        for i in 0..shape.input {
            grow[i] += g_h * feature[i];
            g_feature[i] += g_h * wrow[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SHAPE: DecoderShape = DecoderShape { input: 6, hidden: 5 };

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_parameters_decode_to_mid_gray() {
        let shape = DecoderShape { input: 32, hidden: 32 };
        assert_eq!(shape.param_count(), 1320);
        let m = decode(&shape, &vec![0.0; 1320], &[0.0; 32]);
        assert_eq!(m.kc, DVec3::splat(0.5));
        assert_eq!((m.km, m.kr), (0.5, 0.5));
        assert_eq!(m.kn, DVec3::ZERO);
    }

    #[test]
    fn outputs_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params: Vec<f64> = random(&mut rng, SHAPE.param_count()).iter().map(|v| v * 3.0).collect();
        for _ in 0..50 {
            let m = decode(&SHAPE, &params, &random(&mut rng, 6));
            for v in [m.kc.x, m.kc.y, m.kc.z, m.km, m.kr] {
                assert!(v > 0.0 && v < 1.0);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = random(&mut rng, SHAPE.param_count());
        let feature = random(&mut rng, 6);
        let g: [f64; OUTPUTS] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let loss = |p: &[f64], f: &[f64]| {
            let mut hidden = vec![0.0; SHAPE.hidden];
            let raw = forward_raw(&SHAPE, p, f, &mut hidden);
            let m = to_material(&raw);
            let vals = [m.kc.x, m.kc.y, m.kc.z, m.km, m.kr, m.kn.x, m.kn.y, m.kn.z];
            vals.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut hidden = vec![0.0; SHAPE.hidden];
        let mut gp = vec![0.0; SHAPE.param_count()];
        let mut gf = vec![0.0; 6];
        backward(&SHAPE, &params, &feature, &g, &mut hidden, &mut gp, &mut gf);
        let h = 1e-6;
        for i in 0..params.len() {
            let (mut a, mut b) = (params.clone(), params.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (loss(&a, &feature) - loss(&b, &feature)) / (2.0 * h);
            assert!((fd - gp[i]).abs() <= 1e-2 * fd.abs().max(1e-3), "param {i}: {fd} vs {}", gp[i]);
        }
        for i in 0..6 {
            let (mut a, mut b) = (feature.clone(), feature.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (loss(&params, &a) - loss(&params, &b)) / (2.0 * h);
            assert!((fd - gf[i]).abs() <= 1e-2 * fd.abs().max(1e-3));
        }
    }
}
