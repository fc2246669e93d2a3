//! Diffusion-prior side of the optimization: conditioning images, 2x2 view
//! grids, the forward noise process, score distillation and the backends that
//! answer generate/score requests.

mod conditioning;
mod grid;
mod noise;
mod remote;
mod sds;
mod stub;
pub mod wire;

use thiserror::Error;

use crate::envlight::PrefilteredLight;
use crate::image::{Image, ImageError};
use crate::renderer::{Camera, RenderError};

pub use conditioning::{conditioning_from_gbuffer, conditioning_image, ConditioningImage, BASIS_MATERIALS};
pub use grid::{assemble_grid, split_grid};
pub use noise::{add_noise, alpha_bar, sample_noise};
pub use remote::{RemoteBackend, DEFAULT_TIMEOUT};
pub(crate) use sds::with_retries;
pub use sds::{sds_gradient, sds_weight, SdsParams, MAX_RETRIES};
pub use stub::{ScoreModel, StubBackend};

pub const DEFAULT_CFG_SCALE: f64 = 50.0;

#[derive(Debug, Error)]
pub enum GuidanceError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out: {0}")]
    Timeout(String),
    #[error("malformed backend response: {0}")]
    Schema(String),
    #[error("backend error {status} ({code}): {message}")]
    Server {
        status: u16,
        code: String,
        message: String,
    },
    #[error("transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl GuidanceError {
    /// Failures worth another attempt with the same request.
    pub fn is_transient(&self) -> bool {
        match self {
            GuidanceError::Unreachable(_) | GuidanceError::Timeout(_) | GuidanceError::Transport(_) => true,
            GuidanceError::Server { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Generate,
    Score,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Generate => "generate",
            Mode::Score => "score",
        }
    }
}

/// Camera and light a request image was rendered with. Kept in process for
/// local backends and never sent over the wire.
#[derive(Debug, Clone)]
pub struct ViewHint {
    pub camera: Camera,
    pub light: PrefilteredLight,
}

#[derive(Debug, Clone)]
pub struct GuidanceRequest {
    pub mode: Mode,
    pub prompt: String,
    pub negative_prompt: String,
    /// A conditioning image or a 2x2 grid of them, values in [0, 1].
    pub cond_image: Image,
    /// Score mode only: x_t, same shape as `cond_image`.
    pub noisy_image: Option<Image>,
    /// Score mode only: noise level as a fraction of the schedule.
    pub t: Option<f64>,
    pub strength: f64,
    pub cfg_scale: f64,
    pub seed: u64,
    /// One entry per tile of `cond_image` (1 or 4), in grid order.
    pub views: Vec<ViewHint>,
}

impl GuidanceRequest {
    pub fn generate(prompt: &str, negative_prompt: &str, cond_image: Image, strength: f64, seed: u64) -> Self {
        Self {
            mode: Mode::Generate,
            prompt: prompt.to_string(),
            negative_prompt: negative_prompt.to_string(),
            cond_image,
            noisy_image: None,
            t: None,
            strength,
            cfg_scale: DEFAULT_CFG_SCALE,
            seed,
            views: Vec::new(),
        }
    }

    pub fn score(
        prompt: &str,
        negative_prompt: &str,
        cond_image: Image,
        noisy_image: Image,
        t: f64,
        strength: f64,
        seed: u64,
    ) -> Self {
        Self {
            mode: Mode::Score,
            noisy_image: Some(noisy_image),
            t: Some(t),
            ..Self::generate(prompt, negative_prompt, cond_image, strength, seed)
        }
    }

    pub fn with_views(mut self, views: Vec<ViewHint>) -> Self {
        self.views = views;
        self
    }

    pub fn with_cfg_scale(mut self, cfg_scale: f64) -> Self {
        self.cfg_scale = cfg_scale;
        self
    }

    pub fn validate(&self) -> Result<(), GuidanceError> {
        let bad = |m: String| Err(GuidanceError::InvalidRequest(m));
        if !(0.0..=1.0).contains(&self.strength) {
            return bad(format!("strength {} outside [0, 1]", self.strength));
        }
        if !self.cfg_scale.is_finite() || self.cfg_scale < 0.0 {
            return bad(format!("cfg_scale {} must be finite and non-negative", self.cfg_scale));
        }
        if self.cond_image.channels != 3 || self.cond_image.pixel_count() == 0 {
            return bad("conditioning image must be a non-empty 3-channel image".into());
        }
        if !self.views.is_empty() && self.views.len() != 1 && self.views.len() != 4 {
            return bad(format!("{} view hints; expected 1 or 4", self.views.len()));
        }
        match self.mode {
            Mode::Generate => {
                if self.noisy_image.is_some() || self.t.is_some() {
                    return bad("generate requests carry no noisy image or t".into());
                }
            }
            Mode::Score => {
                let Some(t) = self.t else {
                    return bad("score request without t".into());
                };
                if !(t > 0.0 && t <= 1.0) {
                    return bad(format!("t = {t} outside (0, 1]"));
                }
                let Some(x) = &self.noisy_image else {
                    return bad("score request without noisy image".into());
                };
                if !x.same_shape(&self.cond_image) {
                    return Err(GuidanceError::Shape(format!(
                        "noisy image {}x{}x{} vs conditioning {}x{}x{}",
                        x.width, x.height, x.channels, self.cond_image.width, self.cond_image.height, self.cond_image.channels
                    )));
                }
                if x.data.iter().any(|v| !v.is_finite()) {
                    return bad("noisy image has non-finite values".into());
                }
            }
        }
        Ok(())
    }

    /// Shape every valid response must have.
    pub fn response_shape(&self) -> (usize, usize, usize) {
        (self.cond_image.width, self.cond_image.height, 3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuidanceResponse {
    /// Generated RGB image in [0, 1].
    Image(Image),
    /// Predicted noise, same shape as the noisy image.
    Noise(Image),
}

impl GuidanceResponse {
    pub fn into_image(self) -> Image {
        match self {
            GuidanceResponse::Image(i) | GuidanceResponse::Noise(i) => i,
        }
    }

    /// Checks mode, shape and finiteness against the request.
    pub fn check(&self, request: &GuidanceRequest) -> Result<(), GuidanceError> {
        let (img, ok_mode) = match self {
            GuidanceResponse::Image(i) => (i, request.mode == Mode::Generate),
            GuidanceResponse::Noise(i) => (i, request.mode == Mode::Score),
        };
        if !ok_mode {
            return Err(GuidanceError::Schema(format!("response kind does not match {} request", request.mode.as_str())));
        }
        let shape = (img.width, img.height, img.channels);
        if shape != request.response_shape() {
            return Err(GuidanceError::Shape(format!(
                "response {shape:?}, expected {:?}",
                request.response_shape()
            )));
        }
        if img.data.iter().any(|v| !v.is_finite()) {
            return Err(GuidanceError::Schema("response contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Anything that answers guidance requests. Implementations must be safe to
/// call concurrently.
pub trait GuidanceBackend: Sync {
    fn call(&self, request: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError>;

    /// Validated generate call returning the image.
    fn generate(&self, request: &GuidanceRequest) -> Result<Image, GuidanceError> {
        if request.mode != Mode::Generate {
            return Err(GuidanceError::InvalidRequest("generate called with a score request".into()));
        }
        request.validate()?;
        let resp = self.call(request)?;
        resp.check(request)?;
        Ok(resp.into_image())
    }

    /// Validated score call returning the predicted noise.
    fn score(&self, request: &GuidanceRequest) -> Result<Image, GuidanceError> {
        if request.mode != Mode::Score {
            return Err(GuidanceError::InvalidRequest("score called with a generate request".into()));
        }
        request.validate()?;
        let resp = self.call(request)?;
        resp.check(request)?;
        Ok(resp.into_image())
    }
}
