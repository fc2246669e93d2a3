use std::fmt;
use std::sync::Arc;

use super::{
    alpha_bar, assemble_grid, sample_noise, GuidanceBackend, GuidanceError, GuidanceRequest, GuidanceResponse, Mode,
    ViewHint,
};
use crate::image::Image;

type OracleFn = dyn Fn(&ViewHint) -> Image + Send + Sync;

/// What the stub predicts in score mode.
#[derive(Clone)]
pub enum ScoreModel {
    /// Data distribution is a point mass at this image (tiled to the request
    /// shape).
    Delta(Image),
    /// Point mass whose location depends on the view; multi-view requests get
    /// the 2x2 grid of per-view targets.
    Oracle(Arc<OracleFn>),
    /// Returns exactly the noise the request seed produces.
    ExactNoise,
    /// Exact noise plus a fixed offset image.
    NoiseOffset(Image),
}

impl fmt::Debug for ScoreModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreModel::Delta(mu) => write!(f, "Delta({}x{})", mu.width, mu.height),
            ScoreModel::Oracle(_) => f.write_str("Oracle"),
            ScoreModel::ExactNoise => f.write_str("ExactNoise"),
            ScoreModel::NoiseOffset(c) => write!(f, "NoiseOffset({}x{})", c.width, c.height),
        }
    }
}

/// Deterministic in-process backend. Generate mode returns the target image
/// for the point-mass models and echoes the conditioning image otherwise.
#[derive(Debug, Clone)]
pub struct StubBackend {
    pub model: ScoreModel,
}

/// Repeats `src` to fill `width x height`.
fn tile(src: &Image, width: usize, height: usize) -> Image {
    if src.width == width && src.height == height {
        return src.clone();
    }
    let mut out = Image::new(width, height, src.channels);
    for y in 0..height {
        for x in 0..width {
            out.pixel_mut(x, y).copy_from_slice(src.pixel(x % src.width, y % src.height));
        }
    }
    out
}

impl StubBackend {
    pub fn new(model: ScoreModel) -> Self {
        Self { model }
    }

    pub fn delta(target: Image) -> Self {
        Self::new(ScoreModel::Delta(target))
    }

    pub fn oracle(f: impl Fn(&ViewHint) -> Image + Send + Sync + 'static) -> Self {
        Self::new(ScoreModel::Oracle(Arc::new(f)))
    }

    pub fn echo() -> Self {
        Self::new(ScoreModel::ExactNoise)
    }

    /// Point-mass location for `request`, if the model has one.
    fn target(&self, request: &GuidanceRequest) -> Result<Option<Image>, GuidanceError> {
        let (w, h, _) = request.response_shape();
        match &self.model {
            ScoreModel::Delta(mu) => Ok(Some(tile(mu, w, h))),
            ScoreModel::Oracle(f) => {
                let views: Vec<Image> = request.views.iter().map(|v| f(v)).collect();
                let mu = match views.len() {
                    1 => views.into_iter().next().unwrap(),
                    4 => assemble_grid(&views)?,
                    _ => return Err(GuidanceError::InvalidRequest("oracle stub needs view hints".into())),
                };
                if (mu.width, mu.height) != (w, h) {
                    return Err(GuidanceError::Shape(format!(
                        "oracle target {}x{} for a {w}x{h} request",
                        mu.width, mu.height
                    )));
                }
                Ok(Some(mu))
            }
            ScoreModel::ExactNoise | ScoreModel::NoiseOffset(_) => Ok(None),
        }
    }
}

impl GuidanceBackend for StubBackend {
    fn call(&self, request: &GuidanceRequest) -> Result<GuidanceResponse, GuidanceError> {
        request.validate()?;
        let target = self.target(request)?;
        if request.mode == Mode::Generate {
            return Ok(GuidanceResponse::Image(target.unwrap_or_else(|| request.cond_image.clone())));
        }
        let x_t = request.noisy_image.as_ref().expect("validated");
        let t = request.t.expect("validated");
        let eps_hat = match (&self.model, target) {
            (_, Some(mu)) => {
                let a = alpha_bar(t);
                let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
                Image {
                    data: x_t.data.iter().zip(&mu.data).map(|(&x, &m)| (x - sa * m) / sn).collect(),
                    ..x_t.clone()
                }
            }
            (ScoreModel::NoiseOffset(c), None) => {
                let mut eps = sample_noise(x_t.width, x_t.height, x_t.channels, request.seed);
                let c = tile(c, x_t.width, x_t.height);
                for (e, o) in eps.data.iter_mut().zip(&c.data) {
                    *e += o;
                }
                eps
            }
            _ => sample_noise(x_t.width, x_t.height, x_t.channels, request.seed),
        };
        Ok(GuidanceResponse::Noise(eps_hat))
    }
}
