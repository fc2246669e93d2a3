//! Dense float images plus the tone mapping, PNG/PFM codecs and metrics used
//! throughout the pipeline.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image shape mismatch: {0}")]
    Shape(String),
    #[error("png: {0}")]
    Png(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Row-major, channel-interleaved image with `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if data.len() != width * height * channels {
            return Err(ImageError::Shape(format!(
                "{} samples for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// sRGB transfer function (linear -> encoded), input clamped to [0, 1].
pub fn srgb_encode(linear: f64) -> f64 {
    let x = linear.clamp(0.0, 1.0);
    if x <= 0.003_130_8 {
        12.92 * x
    } else {
        1.055 * x.powf(1.0 / 2.4) - 0.055
    }
}

fn srgb_encode_derivative(linear: f64) -> f64 {
    if !(0.0..=1.0).contains(&linear) {
        0.0
    } else if linear <= 0.003_130_8 {
        12.92
    } else {
        1.055 / 2.4 * linear.powf(1.0 / 2.4 - 1.0)
    }
}

pub fn srgb_decode(encoded: f64) -> f64 {
    let x = encoded.clamp(0.0, 1.0);
    if x <= 0.040_45 {
        x / 12.92
    } else {
        ((x + 0.055) / 1.055).powf(2.4)
    }
}

/// Maps HDR radiance to display range: `x / (1 + x)` followed by sRGB encode.
pub fn tonemap_value(x: f64) -> f64 {
    let x = x.max(0.0);
    srgb_encode(x / (1.0 + x))
}

pub fn tonemap_derivative(x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let y = x / (1.0 + x);
    srgb_encode_derivative(y) / ((1.0 + x) * (1.0 + x))
}

pub fn tonemap(image: &Image) -> Image {
    image.map(tonemap_value)
}

/// Chains `upstream` (gradient w.r.t. the tone-mapped image) back to the HDR
/// image `hdr`.
pub fn tonemap_backward(hdr: &Image, upstream: &Image) -> Image {
    debug_assert!(hdr.same_shape(upstream));
    Image {
        data: hdr
            .data
            .iter()
            .zip(&upstream.data)
            .map(|(&x, &g)| g * tonemap_derivative(x))
            .collect(),
        ..hdr.clone()
    }
}

/// Rec. 709 luminance of an RGB triple.
pub fn luminance(rgb: [f64; 3]) -> f64 {
    0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2]
}

/// Peak signal-to-noise ratio for images in [0, 1]. When `mask` is given only
/// pixels with a nonzero mask value contribute.
pub fn psnr(a: &Image, b: &Image, mask: Option<&[bool]>) -> f64 {
    assert!(a.same_shape(b), "psnr shape mismatch");
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in 0..a.pixel_count() {
        if let Some(m) = mask {
            if !m[p] {
                continue;
            }
        }
        for c in 0..a.channels {
            let d = a.data[p * a.channels + c] - b.data[p * b.channels + c];
            sum += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return f64::INFINITY;
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

fn quantize(v: f64, max: f64) -> f64 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Encodes an image with values in [0, 1] as an 8-bit PNG (1, 3 or 4 channels).
pub fn encode_png8(image: &Image) -> Result<Vec<u8>, ImageError> {
    let bytes: Vec<u8> = image.data.iter().map(|&v| quantize(v, 255.0) as u8).collect();
    encode_png(image, png::BitDepth::Eight, &bytes)
}

/// Encodes an image with values in [0, 1] as a 16-bit PNG.
pub fn encode_png16(image: &Image) -> Result<Vec<u8>, ImageError> {
    let mut bytes = Vec::with_capacity(image.data.len() * 2);
    for &v in &image.data {
        bytes.extend_from_slice(&(quantize(v, 65535.0) as u16).to_be_bytes());
    }
    encode_png(image, png::BitDepth::Sixteen, &bytes)
}

fn encode_png(image: &Image, depth: png::BitDepth, bytes: &[u8]) -> Result<Vec<u8>, ImageError> {
    let color = match image.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        4 => png::ColorType::Rgba,
        c => return Err(ImageError::Shape(format!("cannot encode {c} channels as png"))),
    };
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        encoder.set_color(color);
        encoder.set_depth(depth);
        let mut writer = encoder
            .write_header()
            .map_err(|e| ImageError::Png(e.to_string()))?;
        writer
            .write_image_data(bytes)
            .map_err(|e| ImageError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes an 8- or 16-bit grayscale/RGB/RGBA PNG into [0, 1] samples.
pub fn decode_png(bytes: &[u8]) -> Result<Image, ImageError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| ImageError::Png(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| ImageError::Png(e.to_string()))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(ImageError::Png("indexed png not supported".into()))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let data: Vec<f64> = match info.bit_depth {
        png::BitDepth::Eight => buf.iter().map(|&b| b as f64 / 255.0).collect(),
        png::BitDepth::Sixteen => buf
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
            .collect(),
        d => return Err(ImageError::Png(format!("unsupported bit depth {d:?}"))),
    };
    Image::from_data(width, height, channels, data)
}

pub fn write_png8(path: &Path, image: &Image) -> Result<(), ImageError> {
    std::fs::write(path, encode_png8(image)?)?;
    Ok(())
}

pub fn write_png16(path: &Path, image: &Image) -> Result<(), ImageError> {
    std::fs::write(path, encode_png16(image)?)?;
    Ok(())
}

/// Writes a linear 3-channel image as little-endian PFM (bottom row first).
pub fn write_pfm(path: &Path, image: &Image) -> Result<(), ImageError> {
    if image.channels != 3 {
        return Err(ImageError::Shape("pfm output needs 3 channels".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "PF\n{} {}\n-1.0\n", image.width, image.height)?;
    for y in (0..image.height).rev() {
        for &v in image.pixel_row(y) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

impl Image {
    fn pixel_row(&self, y: usize) -> &[f64] {
        let start = y * self.width * self.channels;
        &self.data[start..start + self.width * self.channels]
    }
}
