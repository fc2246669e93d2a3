use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OptimConfig, PipelineError};

pub const CANONICAL_AZIMUTHS: [f64; 4] = [0.0, 0.5 * PI, PI, 1.5 * PI];
pub const RANDOM_ELEVATION: (f64, f64) = (-30.0 * PI / 180.0, 45.0 * PI / 180.0);
pub const RANDOM_LIGHT_SCALE: (f64, f64) = (0.5, 1.5);
/// Pool entry used as the fixed canonical light.
pub const CANONICAL_LIGHT: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanKind {
    WarmupRecon,
    Recon,
    SdsCanonical,
    SdsRandom,
}

impl PlanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanKind::WarmupRecon => "warmup-recon",
            PlanKind::Recon => "recon",
            PlanKind::SdsCanonical => "sds-canonical",
            PlanKind::SdsRandom => "sds-random",
        }
    }

    pub fn is_sds(self) -> bool {
        matches!(self, PlanKind::SdsCanonical | PlanKind::SdsRandom)
    }
}

/// Which light from the pool, and how it is rotated and scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightChoice {
    pub index: usize,
    pub rotation: f64,
    pub scale: f64,
}

impl LightChoice {
    pub const CANONICAL: LightChoice = LightChoice {
        index: CANONICAL_LIGHT,
        rotation: 0.0,
        scale: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSpec {
    pub azimuth: f64,
    pub elevation: f64,
    pub light: LightChoice,
    /// Index into the canonical views, if this is one.
    pub canonical: Option<usize>,
}

impl ViewSpec {
    pub fn canonical(i: usize) -> Self {
        Self {
            azimuth: CANONICAL_AZIMUTHS[i],
            elevation: 0.0,
            light: LightChoice::CANONICAL,
            canonical: Some(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationPlan {
    pub iteration: usize,
    pub kind: PlanKind,
    pub views: Vec<ViewSpec>,
    /// Position among the SDS iterations.
    pub sds_index: Option<usize>,
    pub t: Option<f64>,
    pub strength: Option<f64>,
}

/// Plan for `iteration`. Random views come from a stream keyed by
/// `(config.seed, iteration)`; `pool_size` is the number of lights available.
pub fn schedule(iteration: usize, config: &OptimConfig, pool_size: usize) -> Result<IterationPlan, PipelineError> {
    if iteration >= config.total_iterations {
        return Err(PipelineError::Schedule(format!(
            "iteration {iteration} outside 0..{}",
            config.total_iterations
        )));
    }
    if pool_size == 0 {
        return Err(PipelineError::Schedule("empty lighting pool".into()));
    }
    let canonical: Vec<ViewSpec> = (0..4).map(ViewSpec::canonical).collect();
    let plan = |kind, views, sds_index, t, strength| IterationPlan {
        iteration,
        kind,
        views,
        sds_index,
        t,
        strength,
    };
    if iteration < config.warmup_iterations {
        return Ok(plan(PlanKind::WarmupRecon, canonical, None, None, None));
    }
    let offset = iteration - config.warmup_iterations;
    if offset.is_multiple_of(2) {
        return Ok(plan(PlanKind::Recon, canonical, None, None, None));
    }
    let k = offset / 2;
    let n = config.sds_iterations();
    let frac = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
    let t = config.t_max + (config.t_min - config.t_max) * frac;
    let s = 1.0 - frac;
    if k.is_multiple_of(4) {
        return Ok(plan(PlanKind::SdsCanonical, canonical, Some(k), Some(t), Some(s)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(iteration as u64);
    let views = (0..config.batch)
        .map(|_| ViewSpec {
            azimuth: rng.random_range(0.0..TAU),
            elevation: rng.random_range(RANDOM_ELEVATION.0..=RANDOM_ELEVATION.1),
            light: LightChoice {
                index: rng.random_range(0..pool_size),
                rotation: rng.random_range(0.0..TAU),
                scale: rng.random_range(RANDOM_LIGHT_SCALE.0..=RANDOM_LIGHT_SCALE.1),
            },
            canonical: None,
        })
        .collect();
    Ok(plan(PlanKind::SdsRandom, views, Some(k), Some(t), Some(s)))
}
