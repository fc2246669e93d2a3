//! Radiance RGBE (`.hdr`) reader and writer.
//!
//! Texels decode as `m * 2^(E - 136)` per channel (`E == 0` is black). Both
//! flat and new-style run-length-encoded scanlines are accepted; the writer
//! emits flat scanlines.

use std::io::Write;
use std::path::Path;

use crate::image::Image;

use super::{EnvironmentLight, LightError};

pub fn decode_rgbe(rgbe: [u8; 4]) -> [f64; 3] {
    if rgbe[3] == 0 {
        return [0.0; 3];
    }
    let f = 2f64.powi(rgbe[3] as i32 - 136);
    [rgbe[0] as f64 * f, rgbe[1] as f64 * f, rgbe[2] as f64 * f]
}

pub fn encode_rgbe(rgb: [f64; 3]) -> [u8; 4] {
    let v = rgb[0].max(rgb[1]).max(rgb[2]);
    if !(v >= 1e-32) {
        return [0; 4];
    }
    // v = mant * 2^exp with mant in [0.5, 1).
    let exp = v.log2().floor() as i32 + 1;
    let scale = 256.0 / 2f64.powi(exp);
    let q = |c: f64| (c.max(0.0) * scale).floor().min(255.0) as u8;
    [q(rgb[0]), q(rgb[1]), q(rgb[2]), (exp + 128) as u8]
}

pub fn read_hdr(path: &Path) -> Result<EnvironmentLight, LightError> {
    let bytes = std::fs::read(path).map_err(|source| LightError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let img = parse_hdr(&bytes)?;
    EnvironmentLight::from_image(img)
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, LightError> {
    let start = *pos;
    let end = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|i| start + i)
        .ok_or_else(|| LightError::Parse("unterminated header".into()))?;
    *pos = end + 1;
    std::str::from_utf8(&bytes[start..end]).map_err(|_| LightError::Parse("non-utf8 header".into()))
}

pub(crate) fn parse_hdr(bytes: &[u8]) -> Result<Image, LightError> {
    let mut pos = 0;
    let magic = read_line(bytes, &mut pos)?;
    if !magic.starts_with("#?") {
        return Err(LightError::Format("missing #? radiance signature".into()));
    }
    loop {
        let line = read_line(bytes, &mut pos)?;
        if line.trim().is_empty() {
            break;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(LightError::Format(format!("pixel format {fmt}")));
            }
        }
    }
    let res = read_line(bytes, &mut pos)?;
    let parts: Vec<&str> = res.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "-Y" || parts[2] != "+X" {
        return Err(LightError::Format(format!("unsupported orientation '{res}'")));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| LightError::Parse(format!("bad dimension '{s}'")))
    };
    let (height, width) = (parse(parts[1])?, parse(parts[3])?);
    let mut img = Image::new(width, height, 3);
    let mut scan = vec![[0u8; 4]; width];
    for y in 0..height {
        read_scanline(bytes, &mut pos, &mut scan)?;
        for (x, t) in scan.iter().enumerate() {
            img.pixel_mut(x, y).copy_from_slice(&decode_rgbe(*t));
        }
    }
    Ok(img)
}

fn take(bytes: &[u8], pos: &mut usize, n: usize) -> Result<usize, LightError> {
    if *pos + n > bytes.len() {
        return Err(LightError::Parse("truncated pixel data".into()));
    }
    let start = *pos;
    *pos += n;
    Ok(start)
}

fn read_scanline(bytes: &[u8], pos: &mut usize, scan: &mut [[u8; 4]]) -> Result<(), LightError> {
    let width = scan.len();
    let start = take(bytes, pos, 4)?;
    let head = [bytes[start], bytes[start + 1], bytes[start + 2], bytes[start + 3]];
    let rle = (8..0x8000).contains(&width)
        && head[0] == 2
        && head[1] == 2
        && head[2] & 0x80 == 0
        && ((head[2] as usize) << 8 | head[3] as usize) == width;
    if !rle {
        scan[0] = head;
        for texel in scan.iter_mut().skip(1) {
            let s = take(bytes, pos, 4)?;
            texel.copy_from_slice(&bytes[s..s + 4]);
        }
        return Ok(());
    }
    for channel in 0..4 {
        let mut x = 0;
        while x < width {
            let s = take(bytes, pos, 1)?;
            let count = bytes[s] as usize;
            if count > 128 {
                let run = count - 128;
                if run == 0 || x + run > width {
                    return Err(LightError::Parse("bad run length".into()));
                }
                let v = bytes[take(bytes, pos, 1)?];
                for texel in &mut scan[x..x + run] {
                    texel[channel] = v;
                }
                x += run;
            } else {
                if count == 0 || x + count > width {
                    return Err(LightError::Parse("bad literal length".into()));
                }
                let s = take(bytes, pos, count)?;
                for (i, texel) in scan[x..x + count].iter_mut().enumerate() {
                    texel[channel] = bytes[s + i];
                }
                x += count;
            }
        }
    }
    Ok(())
}

pub fn write_hdr(path: &Path, radiance: &Image) -> Result<(), LightError> {
    let io_err = |source| LightError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::with_capacity(radiance.pixel_count() * 4 + 128);
    write!(
        out,
        "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y {} +X {}\n",
        radiance.height, radiance.width
    )
    .map_err(io_err)?;
    for y in 0..radiance.height {
        for x in 0..radiance.width {
            let p = radiance.pixel(x, y);
            out.extend_from_slice(&encode_rgbe([p[0], p[1], p[2]]));
        }
    }
    std::fs::write(path, out).map_err(io_err)
}
