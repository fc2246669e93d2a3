use std::fmt::Write as _;

use glam::DVec3;
use rayon::prelude::*;

use super::loss::recon_loss;
use super::reg::smoothness_reg;
use super::schedule::{schedule, IterationPlan, PlanKind};
use super::setup::light_for;
use super::{CanonicalSetup, PipelineError, Prompt, ReferenceSet};
use crate::envlight::PrefilteredLight;
use crate::field::{Adam, FieldError, TextureField};
use crate::geometry::Mesh;
use crate::guidance::{conditioning_from_gbuffer, sds_gradient, GuidanceBackend, GuidanceError, SdsParams};
use crate::image::{tonemap, tonemap_backward, Image};
use crate::renderer::{rasterize, shade, shade_backward, Camera, GBuffer, MaterialGrad, BACKGROUND};

use super::OptimConfig;

/// Everything the optimization renders against.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub mesh: &'a Mesh,
    pub setup: &'a CanonicalSetup,
    /// Prefiltered lighting pool; entry 0 is the canonical light.
    pub pool: &'a [PrefilteredLight],
    /// Needed by reconstruction iterations.
    pub references: Option<&'a ReferenceSet>,
}

/// One line of the run log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub kind: PlanKind,
    pub t: Option<f64>,
    pub strength: Option<f64>,
    pub recon_l2: f64,
    pub recon_perceptual: f64,
    /// `0.5 * mean(g^2)` of the distillation gradient `g`.
    pub sds: f64,
    pub reg: f64,
    /// `lambda_recon * recon + sds + lambda_reg * reg`.
    pub total: f64,
    /// The backend failed and no update was made.
    pub skipped: bool,
}

pub const LOG_HEADER: &str = "iteration,kind,t,s,recon_l2,recon_perceptual,sds,reg,total,skipped";

impl LogRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}",
            self.iteration,
            self.kind.as_str(),
            opt(self.t),
            opt(self.strength),
            self.recon_l2,
            self.recon_perceptual,
            self.sds,
            self.reg,
            self.total,
            self.skipped as u8
        )
    }
}

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(LOG_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv());
    }
    s
}

/// SplitMix64 finalizer over a few keys; used to derive per-view noise and
/// per-iteration sampling seeds.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct ViewPass {
    camera: Camera,
    light: PrefilteredLight,
    canonical: Option<usize>,
    gbuffer: GBuffer,
    hdr: Image,
    display: Image,
}

/// Owns the field and optimizer state and executes iteration plans.
pub struct Trainer<'a> {
    scene: Scene<'a>,
    prompt: Prompt,
    config: OptimConfig,
    backend: &'a dyn GuidanceBackend,
    field: TextureField,
    adam: Adam,
    grad: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        scene: Scene<'a>,
        prompt: Prompt,
        config: OptimConfig,
        backend: &'a dyn GuidanceBackend,
        field: TextureField,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        if scene.pool.is_empty() {
            return Err(PipelineError::Config("lighting pool is empty".into()));
        }
        let n = field.param_count();
        Ok(Self {
            scene,
            prompt,
            adam: Adam::new(n, config.lr),
            config,
            backend,
            field,
            grad: vec![0.0; n],
        })
    }

    pub fn field(&self) -> &TextureField {
        &self.field
    }

    pub fn into_field(self) -> TextureField {
        self.field
    }

    fn render_views(&self, plan: &IterationPlan) -> Result<(Vec<ViewPass>, Vec<Vec<crate::renderer::MaterialSample>>), PipelineError> {
        let setup = self.scene.setup;
        let mut specs = Vec::with_capacity(plan.views.len());
        for v in &plan.views {
            let camera = setup.camera_for(v)?;
            let light = if v.canonical.is_some() && v.light == super::schedule::LightChoice::CANONICAL {
                setup.light.clone()
            } else {
                light_for(&v.light, self.scene.pool)?
            };
            specs.push((camera, light, v.canonical));
        }
        let gbuffers: Vec<GBuffer> = specs.par_iter().map(|(cam, _, _)| rasterize(self.scene.mesh, cam)).collect();
        let materials: Vec<Vec<_>> = gbuffers
            .iter()
            .map(|g| {
                let ps: Vec<DVec3> = g.points.iter().map(|p| p.position).collect();
                self.field.query_batch(&ps)
            })
            .collect();
        let passes = specs
            .into_iter()
            .zip(gbuffers)
            .zip(&materials)
            .map(|(((camera, light, canonical), gbuffer), mats)| {
                let hdr = shade(&gbuffer, mats, &light, &camera, BACKGROUND)?.image;
                let display = tonemap(&hdr);
                Ok(ViewPass {
                    camera,
                    light,
                    canonical,
                    gbuffer,
                    hdr,
                    display,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Ok((passes, materials))
    }

    /// Runs one plan: render, loss, backpropagation and an optimizer step.
    pub fn run_plan(&mut self, plan: &IterationPlan) -> Result<LogRow, PipelineError> {
        let cfg = &self.config;
        let (passes, materials) = self.render_views(plan)?;
        let nviews = passes.len() as f64;
        let mut row = LogRow {
            iteration: plan.iteration,
            kind: plan.kind,
            t: plan.t,
            strength: plan.strength,
            recon_l2: 0.0,
            recon_perceptual: 0.0,
            sds: 0.0,
            reg: 0.0,
            total: 0.0,
            skipped: false,
        };

        // Gradient of the weighted loss with respect to each display image.
        let display_grads: Vec<Image> = if plan.kind.is_sds() {
            let t = plan.t.expect("sds plan has t");
            let strength = plan.strength.expect("sds plan has strength");
            let results: Vec<Result<Image, GuidanceError>> = passes
                .par_iter()
                .enumerate()
                .map(|(v, pass)| {
                    let cond = conditioning_from_gbuffer(&pass.gbuffer, &pass.light, &pass.camera)?;
                    let params = SdsParams {
                        prompt: self.prompt.text.clone(),
                        negative_prompt: self.prompt.negative.clone(),
                        t,
                        strength,
                        cfg_scale: cfg.cfg_scale,
                        seed: derive_seed(cfg.seed, plan.iteration as u64, v as u64),
                    };
                    sds_gradient(self.backend, &pass.display, &cond, &params)
                })
                .collect();
            let mut grads = Vec::with_capacity(results.len());
            for r in results {
                match r {
                    Ok(g) => grads.push(g),
                    Err(e) if matches!(e, GuidanceError::InvalidRequest(_) | GuidanceError::Render(_)) => {
                        return Err(PipelineError::Guidance(e));
                    }
                    Err(e) => {
                        log::warn!("iteration {}: guidance failed ({e}); skipping", plan.iteration);
                        row.skipped = true;
                        return Ok(row);
                    }
                }
            }
            let count: usize = grads.iter().map(|g| g.data.len()).sum();
            row.sds = 0.5 * grads.iter().flat_map(|g| &g.data).map(|v| v * v).sum::<f64>() / count.max(1) as f64;
            grads.into_iter().map(|g| g.map(|v| v / nviews)).collect()
        } else {
            let refs = self
                .scene
                .references
                .ok_or_else(|| PipelineError::Config("reconstruction iteration without references".into()))?;
            let mut grads = Vec::with_capacity(passes.len());
            for pass in &passes {
                let idx = pass.canonical.expect("recon views are canonical");
                let (loss, g) = recon_loss(&pass.display, &pass.gbuffer.mask, &refs.views[idx])?;
                row.recon_l2 += loss.l2 / nviews;
                row.recon_perceptual += loss.perceptual / nviews;
                grads.push(g.map(|v| v * cfg.lambda_recon / nviews));
            }
            grads
        };

        let material_grads: Vec<Vec<MaterialGrad>> = passes
            .par_iter()
            .zip(&materials)
            .zip(&display_grads)
            .map(|((pass, mats), gx)| {
                let g_hdr = tonemap_backward(&pass.hdr, gx);
                shade_backward(&pass.gbuffer, mats, &pass.light, &pass.camera, &g_hdr)
            })
            .collect::<Result<_, _>>()?;
        let ps: Vec<DVec3> = passes.iter().flat_map(|p| p.gbuffer.points.iter().map(|s| s.position)).collect();
        let gs: Vec<MaterialGrad> = material_grads.into_iter().flatten().collect();
        self.field.backward(&ps, &gs, &mut self.grad)?;

        row.reg = smoothness_reg(
            &self.field,
            self.scene.mesh,
            cfg.reg_samples,
            cfg.reg_epsilon,
            derive_seed(cfg.seed, plan.iteration as u64, u64::MAX),
            cfg.lambda_reg,
            &mut self.grad,
        )?;
        row.total = cfg.lambda_recon * (row.recon_l2 + row.recon_perceptual) + row.sds + cfg.lambda_reg * row.reg;
        if !row.total.is_finite() {
            return Err(PipelineError::NonFinite {
                iteration: plan.iteration,
                detail: format!(
                    "loss terms recon_l2={} recon_perceptual={} sds={} reg={}",
                    row.recon_l2, row.recon_perceptual, row.sds, row.reg
                ),
            });
        }
        match self.adam.step(self.field.params_mut(), &self.grad) {
            Ok(()) => {}
            Err(FieldError::NonFiniteGradient { index, value }) => {
                return Err(PipelineError::NonFinite {
                    iteration: plan.iteration,
                    detail: format!("gradient {value} at parameter {index}"),
                })
            }
            Err(e) => return Err(e.into()),
        }
        self.grad.fill(0.0);
        Ok(row)
    }
}

/// Trained field and its log.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub field: TextureField,
    pub log: Vec<LogRow>,
}

impl Optimized {
    pub fn skipped(&self) -> usize {
        self.log.iter().filter(|r| r.skipped).count()
    }
}

/// Runs the full schedule. `on_iteration` sees every log row together with
/// the field after that iteration's update.
pub fn optimize(
    scene: Scene<'_>,
    prompt: &Prompt,
    config: &OptimConfig,
    backend: &dyn GuidanceBackend,
    field: TextureField,
    mut on_iteration: impl FnMut(&LogRow, &TextureField),
) -> Result<Optimized, PipelineError> {
    if scene.references.is_none() {
        return Err(PipelineError::Config("optimization needs the stage-one references".into()));
    }
    let mut trainer = Trainer::new(scene, prompt.clone(), config.clone(), backend, field)?;
    let mut log = Vec::with_capacity(config.total_iterations);
    for i in 0..config.total_iterations {
        let plan = schedule(i, config, scene.pool.len())?;
        let row = trainer.run_plan(&plan)?;
        log::debug!("{}", row.to_csv());
        on_iteration(&row, trainer.field());
        log.push(row);
    }
    Ok(Optimized {
        field: trainer.into_field(),
        log,
    })
}

/// Exponential moving average with smoothing `2 / (window + 1)`.
pub fn smoothed(values: &[f64], window: usize) -> Vec<f64> {
    let a = 2.0 / (window as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = None;
    for &v in values {
        let next = match acc {
            None => v,
            Some(prev) => a * v + (1.0 - a) * prev,
        };
        acc = Some(next);
        out.push(next);
    }
    out
}
