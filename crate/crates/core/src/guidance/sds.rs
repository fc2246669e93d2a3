use std::time::Duration;

use super::{
    add_noise, sample_noise, ConditioningImage, GuidanceBackend, GuidanceError, GuidanceRequest,
};
use crate::image::Image;

/// Extra attempts after a transient backend failure.
pub const MAX_RETRIES: usize = 3;

/// Timestep weighting `w(t)`.
pub fn sds_weight(_t: f64) -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdsParams {
    pub prompt: String,
    pub negative_prompt: String,
    pub t: f64,
    pub strength: f64,
    pub cfg_scale: f64,
    /// Seeds the noise; also sent as the request seed.
    pub seed: u64,
}

/// `w(t) (eps_hat - eps)` for the tone-mapped render `x`. The backend is a
/// constant with respect to `x`.
pub fn sds_gradient(
    backend: &dyn GuidanceBackend,
    x: &Image,
    cond: &ConditioningImage,
    params: &SdsParams,
) -> Result<Image, GuidanceError> {
    let eps = sample_noise(x.width, x.height, x.channels, params.seed);
    let x_t = add_noise(x, params.t, &eps)?;
    let request = GuidanceRequest::score(
        &params.prompt,
        &params.negative_prompt,
        cond.image.clone(),
        x_t,
        params.t,
        params.strength,
        params.seed,
    )
    .with_cfg_scale(params.cfg_scale)
    .with_views(vec![cond.view()]);
    let eps_hat = with_retries(|| backend.score(&request))?;
    let w = sds_weight(params.t);
    Ok(Image {
        data: eps_hat.data.iter().zip(&eps.data).map(|(&h, &e)| w * (h - e)).collect(),
        ..eps
    })
}

/// Runs `f`, retrying transient failures up to [`MAX_RETRIES`] times with a
/// doubling pause.
pub(crate) fn with_retries<T>(mut f: impl FnMut() -> Result<T, GuidanceError>) -> Result<T, GuidanceError> {
    let mut pause = Duration::from_millis(200);
    let mut attempt = 0;
    loop {
        match f() {
            Err(e) if e.is_transient() && attempt < MAX_RETRIES => {
                attempt += 1;
                log::warn!("guidance request failed ({e}); retry {attempt}/{MAX_RETRIES}");
                std::thread::sleep(pause);
                pause *= 2;
            }
            other => return other,
        }
    }
}
