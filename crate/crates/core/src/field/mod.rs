//! Trainable material field: a multi-resolution hash encoding followed by a
//! small decoder, its optimizer, UV baking and checkpoints.

mod adam;
mod bake;
mod checkpoint;
pub mod decoder;
pub mod hashgrid;

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::SurfacePoint;
use crate::renderer::{MaterialField, MaterialGrad, MaterialSample};

pub use adam::Adam;
pub use bake::{bake_uv, BakedMaterial, MaterialMaps, DILATION_TEXELS};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
use decoder::{DecoderShape, OUTPUTS};
use hashgrid::GridLayout;

/// Points per work item in the batched forward and backward passes. Fixed so
/// floating-point sums do not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("non-finite gradient {value} at parameter {index}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("{points} query points but {grads} gradients")]
    LengthMismatch { points: usize, grads: usize },
    #[error("gradient buffer has {got} entries, field has {expected}")]
    GradientLength { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] crate::image::ImageError),
    #[error("bake resolution must be at least 64, got {0}")]
    BakeResolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    pub levels: usize,
    pub features_per_level: usize,
    pub log2_table_size: u32,
    pub base_resolution: usize,
    pub finest_resolution: usize,
    pub hidden: usize,
    /// Half-width of the uniform table initialization.
    pub table_init: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            features_per_level: 2,
            log2_table_size: 19,
            base_resolution: 16,
            finest_resolution: 2048,
            hidden: 32,
            table_init: 1e-4,
        }
    }
}

/// `Gamma(beta(p))`. Parameters live in one flat array: decoder first, then
/// the hash tables level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureField {
    config: FieldConfig,
    layout: GridLayout,
    shape: DecoderShape,
    params: Vec<f64>,
}

impl TextureField {
    /// Tables uniform in `+-table_init`, decoder weights Kaiming-normal,
    /// biases zero.
    pub fn new(config: FieldConfig, seed: u64) -> Self {
        let layout = GridLayout::new(&config);
        let shape = DecoderShape {
            input: layout.output_dim(),
            hidden: config.hidden,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(shape.param_count() + layout.total);
        let w1 = Normal::new(0.0, (2.0 / shape.input as f64).sqrt()).unwrap();
        params.extend((0..shape.hidden * shape.input).map(|_| w1.sample(&mut rng)));
        params.extend(std::iter::repeat_n(0.0, shape.hidden));
        let w2 = Normal::new(0.0, (2.0 / shape.hidden as f64).sqrt()).unwrap();
        params.extend((0..OUTPUTS * shape.hidden).map(|_| w2.sample(&mut rng)));
        params.extend(std::iter::repeat_n(0.0, OUTPUTS));
        let a = config.table_init;
        params.extend((0..layout.total).map(|_| if a > 0.0 { rng.random_range(-a..a) } else { 0.0 }));
        Self {
            config,
            layout,
            shape,
            params,
        }
    }

    /// Rebuilds a field from a flat parameter array laid out like
    /// [`TextureField::params`].
    pub fn from_params(config: FieldConfig, params: Vec<f64>) -> Result<Self, FieldError> {
        let mut field = Self::new(FieldConfig { table_init: 0.0, ..config }, 0);
        field.config = config;
        if params.len() != field.params.len() {
            return Err(FieldError::Checkpoint(format!(
                "expected {} parameters, got {}",
                field.params.len(),
                params.len()
            )));
        }
        field.params = params;
        Ok(field)
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn decoder_shape(&self) -> DecoderShape {
        self.shape
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn decoder_param_count(&self) -> usize {
        self.shape.param_count()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn split(&self) -> (&[f64], &[f64]) {
        self.params.split_at(self.shape.param_count())
    }

    pub fn encode(&self, p: DVec3) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.output_dim()];
        self.layout.encode(self.split().1, p, &mut out);
        out
    }

    pub fn decode(&self, feature: &[f64]) -> MaterialSample {
        decoder::decode(&self.shape, self.split().0, feature)
    }

    pub fn query(&self, p: DVec3) -> MaterialSample {
        self.decode(&self.encode(p))
    }

    pub fn query_batch(&self, ps: &[DVec3]) -> Vec<MaterialSample> {
        let (dec, tables) = self.split();
        ps.par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                let mut feature = vec![0.0; self.layout.output_dim()];
                let mut hidden = vec![0.0; self.shape.hidden];
                chunk
                    .iter()
                    .map(|&p| {
                        self.layout.encode(tables, p, &mut feature);
                        decoder::to_material(&decoder::forward_raw(&self.shape, dec, &feature, &mut hidden))
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Adds the parameter gradient of `sum_i grads[i] . material(ps[i])` into
    /// `out`. Untouched table rows are left as they are.
    pub fn backward(&self, ps: &[DVec3], grads: &[MaterialGrad], out: &mut [f64]) -> Result<(), FieldError> {
        if ps.len() != grads.len() {
            return Err(FieldError::LengthMismatch {
                points: ps.len(),
                grads: grads.len(),
            });
        }
        if out.len() != self.params.len() {
            return Err(FieldError::GradientLength {
                expected: self.params.len(),
                got: out.len(),
            });
        }
        let odim = self.layout.output_dim();
        let ndec = self.shape.param_count();
        let (dec, tables) = self.split();
        let mut g_features = vec![0.0; ps.len() * odim];
        let partials: Vec<Vec<f64>> = g_features
            .par_chunks_mut(CHUNK * odim)
            .zip(ps.par_chunks(CHUNK))
            .zip(grads.par_chunks(CHUNK))
            .map(|((gf, pc), gc)| {
                let mut g_dec = vec![0.0; ndec];
                let mut feature = vec![0.0; odim];
                let mut hidden = vec![0.0; self.shape.hidden];
                for (i, (&p, g)) in pc.iter().zip(gc).enumerate() {
                    if g.is_zero() {
                        continue;
                    }
                    self.layout.encode(tables, p, &mut feature);
                    decoder::backward(
                        &self.shape,
                        dec,
                        &feature,
                        &g.to_array(),
                        &mut hidden,
                        &mut g_dec,
                        &mut gf[i * odim..(i + 1) * odim],
                    );
                }
                g_dec
            })
            .collect();
        let (out_dec, out_tables) = out.split_at_mut(ndec);
        for part in &partials {
            for (o, v) in out_dec.iter_mut().zip(part) {
                *o += v;
            }
        }
        self.layout.backward(ps, &g_features, out_tables);
        Ok(())
    }
}

impl MaterialField for TextureField {
    fn materials(&self, points: &[SurfacePoint]) -> Vec<MaterialSample> {
        let ps: Vec<DVec3> = points.iter().map(|p| p.position).collect();
        self.query_batch(&ps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> FieldConfig {
        FieldConfig {
            levels: 4,
            log2_table_size: 10,
            base_resolution: 4,
            finest_resolution: 64,
            hidden: 8,
            ..FieldConfig::default()
        }
    }

    #[test]
    fn default_field_has_32_features_and_starts_near_gray() {
        let field = TextureField::new(FieldConfig::default(), 0);
        assert_eq!(field.encode(DVec3::new(0.1, 0.2, 0.3)).len(), 32);
        assert_eq!(field.decoder_param_count(), 1320);
        let m = field.query(DVec3::new(-0.4, 0.5, 0.2));
        assert!((m.kc - DVec3::splat(0.5)).abs().max_element() < 1e-2);
        assert!((m.km - 0.5).abs() < 1e-2 && (m.kr - 0.5).abs() < 1e-2);
    }

    #[test]
    fn encoding_is_deterministic_and_continuous() {
        let field = TextureField::new(FieldConfig { table_init: 1.0, ..small_config() }, 5);
        let p = DVec3::new(0.123, -0.456, 0.789);
        assert_eq!(field.encode(p), field.encode(p));
        let q = p + DVec3::new(1e-6, 0.0, 0.0);
        let diff = field
            .encode(p)
            .iter()
            .zip(field.encode(q))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-3);
    }

    #[test]
    fn batch_query_matches_single_queries() {
        let field = TextureField::new(FieldConfig { table_init: 0.5, ..small_config() }, 2);
        let ps: Vec<DVec3> = (0..600).map(|i| DVec3::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), 0.3)).collect();
        let batch = field.query_batch(&ps);
        for (p, m) in ps.iter().zip(&batch) {
            assert_eq!(field.query(*p), *m);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let field = TextureField::new(small_config(), 1);
        let ps = vec![DVec3::new(0.1, 0.2, 0.3); 10];
        let mut out = vec![0.0; field.param_count()];
        field.backward(&ps, &vec![MaterialGrad::default(); 10], &mut out).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_point_touches_at_most_eight_rows_per_level() {
        let field = TextureField::new(FieldConfig { table_init: 0.5, ..small_config() }, 1);
        let g = MaterialGrad {
            kc: DVec3::ONE,
            km: 1.0,
            kr: -1.0,
            kn: DVec3::new(0.5, 0.5, 0.0),
        };
        let mut out = vec![0.0; field.param_count()];
        field.backward(&[DVec3::new(0.3, -0.2, 0.6)], &[g], &mut out).unwrap();
        let fdim = field.layout().features;
        let tables = &out[field.decoder_param_count()..];
        for lv in &field.layout().levels {
            let rows = (0..lv.size)
                .filter(|r| tables[lv.offset + r * fdim..][..fdim].iter().any(|&v| v != 0.0))
                .count();
            assert!((1..=8).contains(&rows), "{rows}");
        }
    }

    #[test]
    fn mismatched_lengths_are_errors() {
        let field = TextureField::new(small_config(), 1);
        let mut out = vec![0.0; field.param_count()];
        assert!(matches!(
            field.backward(&[DVec3::ZERO], &[], &mut out),
            Err(FieldError::LengthMismatch { .. })
        ));
        assert!(matches!(
            field.backward(&[], &[], &mut [0.0; 3]),
            Err(FieldError::GradientLength { .. })
        ));
    }

    #[test]
    fn field_gradient_matches_central_differences() {
        let mut field = TextureField::new(FieldConfig { table_init: 0.5, ..small_config() }, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ps: Vec<DVec3> = (0..20)
            .map(|_| DVec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let gs: Vec<MaterialGrad> = (0..20)
            .map(|_| MaterialGrad {
                kc: DVec3::new(rng.random(), rng.random(), rng.random()),
                km: rng.random(),
                kr: rng.random(),
                kn: DVec3::new(rng.random(), rng.random(), 0.0),
            })
            .collect();
        let loss = |f: &TextureField| -> f64 {
            f.query_batch(&ps)
                .iter()
                .zip(&gs)
                .map(|(m, g)| g.kc.dot(m.kc) + g.km * m.km + g.kr * m.kr + g.kn.dot(m.kn))
                .sum()
        };
        let mut grad = vec![0.0; field.param_count()];
        field.backward(&ps, &gs, &mut grad).unwrap();
        let nonzero: Vec<usize> = (0..grad.len()).filter(|&i| grad[i] != 0.0).collect();
        let h = 1e-6;
        for &i in nonzero.iter().step_by(7).take(200) {
            let orig = field.params[i];
            field.params[i] = orig + h;
            let lp = loss(&field);
            field.params[i] = orig - h;
            let lm = loss(&field);
            field.params[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-4 * fd.abs().max(1e-2), "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
