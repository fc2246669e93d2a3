use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::field::TextureField;
use crate::geometry::{sample_surface, Mesh};
use crate::renderer::MaterialGrad;

/// Surface points paired with a tangent-plane perturbation of themselves.
/// The offset is drawn uniformly from a ball of radius `epsilon` and its
/// normal component removed.
pub fn perturbed_pairs(
    mesh: &Mesh,
    samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<(DVec3, DVec3)>, PipelineError> {
    let points = sample_surface(mesh, samples, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Ok(points
        .iter()
        .map(|p| {
            let d = loop {
                let v = DVec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.length_squared() <= 1.0 {
                    break v * epsilon;
                }
            };
            let n = p.normal;
            (p.position, p.position + d - n * d.dot(n))
        })
        .collect())
}

/// Mean over the pairs of `|kc(p) - kc(q)|_1`.
pub fn smoothness_value(pairs: &[(DVec3, DVec3)], kc: impl Fn(&[DVec3]) -> Vec<DVec3>) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let a = kc(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let b = kc(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (*x - *y).abs().element_sum()).sum();
    sum / pairs.len() as f64
}

/// Smoothness term and its subgradient, added into `grad` scaled by
/// `weight`. Returns the unweighted value.
pub fn smoothness_reg(
    field: &TextureField,
    mesh: &Mesh,
    samples: usize,
    epsilon: f64,
    seed: u64,
    weight: f64,
    grad: &mut [f64],
) -> Result<f64, PipelineError> {
    if samples == 0 {
        return Err(PipelineError::Config("smoothness term needs at least one sample".into()));
    }
    let pairs = perturbed_pairs(mesh, samples, epsilon, seed)?;
    let ps: Vec<DVec3> = pairs.iter().map(|p| p.0).collect();
    let qs: Vec<DVec3> = pairs.iter().map(|p| p.1).collect();
    let a = field.query_batch(&ps);
    let b = field.query_batch(&qs);
    let scale = weight / pairs.len() as f64;
    let mut value = 0.0;
    let mut ga = Vec::with_capacity(pairs.len());
    let mut gb = Vec::with_capacity(pairs.len());
    for (ma, mb) in a.iter().zip(&b) {
        let d = ma.kc - mb.kc;
        value += d.abs().element_sum();
        let s = DVec3::new(sign(d.x), sign(d.y), sign(d.z)) * scale;
        ga.push(MaterialGrad { kc: s, ..Default::default() });
        gb.push(MaterialGrad { kc: -s, ..Default::default() });
    }
    field.backward(&ps, &ga, grad)?;
    field.backward(&qs, &gb, grad)?;
    Ok(value / pairs.len() as f64)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
