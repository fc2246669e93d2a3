//! Relightable texture synthesis for triangle meshes.
//!
//! The crate is organized around the optimization loop:
//!
//! * [`geometry`] loads meshes and samples their surface.
//! * [`envlight`] loads HDR environment maps and precomputes the split-sum
//!   lighting products.
//! * [`renderer`] rasterizes G-buffers and evaluates (and differentiates) the
//!   GGX / split-sum shading model.
//! * [`field`] holds the trainable hash-grid material field, its optimizer and
//!   UV baking.
//! * [`guidance`] builds conditioning images, talks to guidance backends and
//!   computes score-distillation gradients.
//! * [`pipeline`] runs reference generation and texture optimization.

pub mod envlight;
pub mod field;
pub mod geometry;
pub mod guidance;
pub mod image;
pub mod math;
pub mod pipeline;
pub mod renderer;

pub use glam::{DVec2, DVec3};
