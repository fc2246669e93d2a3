//! JSON bodies of the guidance HTTP contract.
//!
//! `POST /v1/generate` and `POST /v1/score` both take a [`WireRequest`].
//! Display-range images travel as base64 PNG; noisy images and predicted
//! noise as [`FloatArray`] (base64 of little-endian `float32`, shape
//! `[height, width, channels]`). Failures answer with a non-2xx status and an
//! [`ErrorBody`].

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{GuidanceError, GuidanceRequest, GuidanceResponse, Mode};
use crate::image::{decode_png, encode_png8, Image};

pub const GENERATE_PATH: &str = "/v1/generate";
pub const SCORE_PATH: &str = "/v1/score";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatArray {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub mode: String,
    pub prompt: String,
    pub negative_prompt: String,
    /// Base64 PNG.
    pub cond_image: String,
    pub noisy_image: Option<FloatArray>,
    pub t: Option<f64>,
    pub strength: f64,
    pub cfg_scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    /// Base64 PNG.
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub noise: FloatArray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

fn schema(msg: impl Into<String>) -> GuidanceError {
    GuidanceError::Schema(msg.into())
}

pub fn encode_float_array(image: &Image) -> FloatArray {
    let mut bytes = Vec::with_capacity(image.data.len() * 4);
    for &v in &image.data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    FloatArray {
        dtype: "float32".into(),
        shape: vec![image.height, image.width, image.channels],
        data: STANDARD.encode(bytes),
    }
}

pub fn decode_float_array(array: &FloatArray) -> Result<Image, GuidanceError> {
    if array.dtype != "float32" {
        return Err(schema(format!("dtype {:?}, expected \"float32\"", array.dtype)));
    }
    let [h, w, c] = array.shape[..] else {
        return Err(schema(format!("shape {:?} is not [height, width, channels]", array.shape)));
    };
    let bytes = STANDARD.decode(&array.data).map_err(|e| schema(format!("float array base64: {e}")))?;
    let expected = h.checked_mul(w).and_then(|n| n.checked_mul(c)).and_then(|n| n.checked_mul(4));
    if expected != Some(bytes.len()) {
        return Err(schema(format!("{} bytes for shape {:?}", bytes.len(), array.shape)));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(Image::from_data(w, h, c, data)?)
}

pub fn encode_png_base64(image: &Image) -> Result<String, GuidanceError> {
    Ok(STANDARD.encode(encode_png8(image)?))
}

/// Decodes a base64 PNG to RGB, dropping alpha.
pub fn decode_png_base64(data: &str) -> Result<Image, GuidanceError> {
    let bytes = STANDARD.decode(data).map_err(|e| schema(format!("png base64: {e}")))?;
    let img = decode_png(&bytes).map_err(|e| schema(format!("png: {e}")))?;
    match img.channels {
        3 => Ok(img),
        4 => Ok(Image {
            data: img.data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
            channels: 3,
            ..img
        }),
        c => Err(schema(format!("png has {c} channels, expected RGB"))),
    }
}

pub fn encode_request(request: &GuidanceRequest) -> Result<WireRequest, GuidanceError> {
    Ok(WireRequest {
        mode: request.mode.as_str().into(),
        prompt: request.prompt.clone(),
        negative_prompt: request.negative_prompt.clone(),
        cond_image: encode_png_base64(&request.cond_image)?,
        noisy_image: request.noisy_image.as_ref().map(encode_float_array),
        t: request.t,
        strength: request.strength,
        cfg_scale: request.cfg_scale,
        seed: request.seed,
    })
}

/// Parses a wire request back into a [`GuidanceRequest`] (without view
/// hints) and validates it.
pub fn decode_request(wire: &WireRequest) -> Result<GuidanceRequest, GuidanceError> {
    let mode = match wire.mode.as_str() {
        "generate" => Mode::Generate,
        "score" => Mode::Score,
        m => return Err(schema(format!("unknown mode {m:?}"))),
    };
    let request = GuidanceRequest {
        mode,
        prompt: wire.prompt.clone(),
        negative_prompt: wire.negative_prompt.clone(),
        cond_image: decode_png_base64(&wire.cond_image)?,
        noisy_image: wire.noisy_image.as_ref().map(decode_float_array).transpose()?,
        t: wire.t,
        strength: wire.strength,
        cfg_scale: wire.cfg_scale,
        seed: wire.seed,
        views: Vec::new(),
    };
    request.validate()?;
    Ok(request)
}

/// Serializes a response body for `mode`.
pub fn encode_response(response: &GuidanceResponse) -> Result<String, GuidanceError> {
    let json = match response {
        GuidanceResponse::Image(img) => serde_json::to_string(&GenerateResponse {
            image: encode_png_base64(img)?,
        }),
        GuidanceResponse::Noise(img) => serde_json::to_string(&ScoreResponse {
            noise: encode_float_array(img),
        }),
    };
    json.map_err(|e| schema(e.to_string()))
}

/// Parses a 2xx response body for a request of the given mode.
pub fn decode_response(mode: Mode, body: &str) -> Result<GuidanceResponse, GuidanceError> {
    match mode {
        Mode::Generate => {
            let r: GenerateResponse =
                serde_json::from_str(body).map_err(|e| schema(format!("generate response: {e}")))?;
            Ok(GuidanceResponse::Image(decode_png_base64(&r.image)?))
        }
        Mode::Score => {
            let r: ScoreResponse = serde_json::from_str(body).map_err(|e| schema(format!("score response: {e}")))?;
            Ok(GuidanceResponse::Noise(decode_float_array(&r.noise)?))
        }
    }
}

pub fn path_for(mode: Mode) -> &'static str {
    match mode {
        Mode::Generate => GENERATE_PATH,
        Mode::Score => SCORE_PATH,
    }
}
