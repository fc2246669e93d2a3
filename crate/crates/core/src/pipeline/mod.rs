//! Two-stage orchestration: reference generation from the canonical views,
//! then the scheduled optimization of the material field, plus the
//! backprojection baseline and turntable output.

mod backproject;
mod config;
mod loss;
mod optimize;
mod reg;
pub mod schedule;
mod setup;
mod stage1;
mod synthetic;
mod turntable;

use thiserror::Error;

use crate::field::FieldError;
use crate::geometry::GeometryError;
use crate::guidance::GuidanceError;
use crate::renderer::RenderError;

pub use backproject::{backproject_baseline, Backprojection, UNCOVERED_COLOR};
pub use config::OptimConfig;
pub use loss::{recon_loss, ReconLoss, PYRAMID_LEVELS};
pub use optimize::{derive_seed, log_to_csv, optimize, smoothed, LogRow, Optimized, Scene, Trainer, LOG_HEADER};
pub use reg::{perturbed_pairs, smoothness_reg, smoothness_value};
pub use schedule::{schedule, IterationPlan, LightChoice, PlanKind, ViewSpec};
pub use setup::{light_for, CanonicalSetup, DEFAULT_FOV_Y, FRAME_MARGIN};
pub use stage1::{stage1_reference, Prompt, ReferenceSet};
pub use synthetic::SyntheticMaterial;
pub use turntable::{render_canonical, turntable};

/// Iterations between snapshot renders.
pub const SNAPSHOT_EVERY: usize = 50;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("guidance backend failed: {0}")]
    Backend(GuidanceError),
    #[error("non-finite value at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
