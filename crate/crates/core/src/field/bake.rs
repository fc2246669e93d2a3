//! Baking a material field into UV-space texture maps and sampling them back.

use std::path::Path;

use glam::{DVec2, DVec3};

use crate::geometry::{Mesh, SurfacePoint};
use crate::image::{decode_png, srgb_decode, srgb_encode, write_png16, write_png8, Image};
use crate::renderer::{MaterialField, MaterialSample};

use super::FieldError;

/// Passes of one-texel dilation applied around UV charts.
pub const DILATION_TEXELS: usize = 4;

/// Square material maps. Row 0 is `v = 1`. `kc` is linear; `normal` holds the
/// tangent-space normal encoded as `(n + 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMaps {
    pub resolution: usize,
    pub kc: Image,
    pub km: Image,
    pub kr: Image,
    pub normal: Image,
    /// Texels inside a chart or reached by dilation.
    pub filled: Vec<bool>,
}

fn texel_uv(x: usize, y: usize, res: usize) -> DVec2 {
    DVec2::new((x as f64 + 0.5) / res as f64, 1.0 - (y as f64 + 0.5) / res as f64)
}

/// Tangent-space normal for bump offset `kn`, matching the renderer's
/// perturbation.
pub fn encode_normal(kn: DVec3) -> DVec3 {
    let n = DVec3::new(0.5 * kn.x.tanh(), 0.5 * kn.y.tanh(), 1.0).normalize();
    (n + DVec3::ONE) * 0.5
}

/// Inverse of [`encode_normal`] for the `x`/`y` components of `kn`.
pub fn decode_normal(encoded: DVec3) -> DVec3 {
    let n = encoded * 2.0 - DVec3::ONE;
    let z = n.z.max(1e-6);
    let lim = 1.0 - 1e-9;
    DVec3::new(
        (2.0 * n.x / z).clamp(-lim, lim).atanh(),
        (2.0 * n.y / z).clamp(-lim, lim).atanh(),
        0.0,
    )
}

/// Rasterizes every face in UV space, stores the field's material at each
/// covered texel center, then dilates charts by [`DILATION_TEXELS`]. Texels
/// claimed by several faces keep the last face's value.
pub fn bake_uv(mesh: &Mesh, field: &dyn MaterialField, resolution: usize) -> Result<MaterialMaps, FieldError> {
    if resolution < 64 {
        return Err(FieldError::BakeResolution(resolution));
    }
    let res = resolution;
    let mut owner: Vec<Option<SurfacePoint>> = vec![None; res * res];
    let mut overlaps = 0usize;
    for face in 0..mesh.faces.len() {
        let f = mesh.faces[face];
        let uv = f.map(|i| mesh.uvs[i as usize]);
        let area = (uv[1] - uv[0]).perp_dot(uv[2] - uv[0]);
        if area.abs() < 1e-18 {
            continue;
        }
        let lo = uv[0].min(uv[1]).min(uv[2]);
        let hi = uv[0].max(uv[1]).max(uv[2]);
        let x0 = ((lo.x * res as f64 - 0.5).ceil().max(0.0)) as usize;
        let x1 = ((hi.x * res as f64 - 0.5).floor().min(res as f64 - 1.0)) as i64;
        let y0 = (((1.0 - hi.y) * res as f64 - 0.5).ceil().max(0.0)) as usize;
        let y1 = (((1.0 - lo.y) * res as f64 - 0.5).floor().min(res as f64 - 1.0)) as i64;
        if x1 < 0 || y1 < 0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let p = texel_uv(x, y, res);
                let b1 = (p - uv[0]).perp_dot(uv[2] - uv[0]) / area;
                let b2 = (uv[1] - uv[0]).perp_dot(p - uv[0]) / area;
                let bary = DVec3::new(1.0 - b1 - b2, b1, b2);
                if bary.min_element() < -1e-12 {
                    continue;
                }
                let slot = &mut owner[y * res + x];
                if slot.is_some() {
                    overlaps += 1;
                }
                *slot = Some(mesh.surface_point(face, bary.max(DVec3::ZERO) / bary.max(DVec3::ZERO).element_sum()));
            }
        }
    }
    if overlaps > 0 {
        log::warn!("bake: {overlaps} texels covered by more than one face; keeping the last");
    }

    let texels: Vec<usize> = (0..res * res).filter(|&i| owner[i].is_some()).collect();
    let points: Vec<SurfacePoint> = texels.iter().map(|&i| owner[i].unwrap()).collect();
    let materials = field.materials(&points);

    // One 8-channel image: kc(3), km, kr, normal(3).
    let mut packed = Image::new(res, res, 8);
    let mut filled = vec![false; res * res];
    for (&i, m) in texels.iter().zip(&materials) {
        let n = encode_normal(m.kn);
        packed.data[i * 8..i * 8 + 8].copy_from_slice(&[m.kc.x, m.kc.y, m.kc.z, m.km, m.kr, n.x, n.y, n.z]);
        filled[i] = true;
    }
    dilate(&mut packed, &mut filled, DILATION_TEXELS);
    Ok(MaterialMaps::unpack(&packed, filled))
}

/// Fills unfilled texels with the mean of their filled 8-neighbours, one ring
/// per pass.
fn dilate(img: &mut Image, filled: &mut [bool], passes: usize) {
    let (w, h, c) = (img.width, img.height, img.channels);
    for _ in 0..passes {
        let prev = filled.to_vec();
        let src = img.data.clone();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if prev[i] {
                    continue;
                }
                let mut acc = vec![0.0; c];
                let mut count = 0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let j = ny as usize * w + nx as usize;
                        if prev[j] {
                            count += 1;
                            for (a, &v) in acc.iter_mut().zip(&src[j * c..(j + 1) * c]) {
                                *a += v;
                            }
                        }
                    }
                }
                if count > 0 {
                    for (k, a) in acc.iter().enumerate() {
                        img.data[i * c + k] = a / count as f64;
                    }
                    filled[i] = true;
                }
            }
        }
    }
}

impl MaterialMaps {
    fn unpack(packed: &Image, filled: Vec<bool>) -> Self {
        let res = packed.width;
        let channel = |range: std::ops::Range<usize>| {
            let mut img = Image::new(res, res, range.len());
            for i in 0..res * res {
                for (k, ch) in range.clone().enumerate() {
                    img.data[i * range.len() + k] = packed.data[i * 8 + ch];
                }
            }
            img
        };
        Self {
            resolution: res,
            kc: channel(0..3),
            km: channel(3..4),
            kr: channel(4..5),
            normal: channel(5..8),
            filled,
        }
    }

    /// Writes `kc.png` (8-bit sRGB, alpha = filled), `km.png` and `kr.png`
    /// (8-bit linear gray) and `normal.png` (16-bit RGB).
    pub fn write_pngs(&self, dir: &Path) -> Result<(), FieldError> {
        let res = self.resolution;
        let mut kc = Image::new(res, res, 4);
        for i in 0..res * res {
            for k in 0..3 {
                kc.data[i * 4 + k] = srgb_encode(self.kc.data[i * 3 + k]);
            }
            kc.data[i * 4 + 3] = if self.filled[i] { 1.0 } else { 0.0 };
        }
        write_png8(&dir.join("kc.png"), &kc)?;
        write_png8(&dir.join("km.png"), &self.km)?;
        write_png8(&dir.join("kr.png"), &self.kr)?;
        write_png16(&dir.join("normal.png"), &self.normal)?;
        Ok(())
    }

    /// Reads maps written by [`MaterialMaps::write_pngs`].
    pub fn read_pngs(dir: &Path) -> Result<Self, FieldError> {
        let read = |name: &str, channels: usize| -> Result<Image, FieldError> {
            let path = dir.join(name);
            let bytes = std::fs::read(&path).map_err(|source| FieldError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let img = decode_png(&bytes)?;
            if img.channels != channels || img.width != img.height {
                return Err(FieldError::Checkpoint(format!("{name}: unexpected layout")));
            }
            Ok(img)
        };
        let kc_rgba = read("kc.png", 4)?;
        let res = kc_rgba.width;
        let mut kc = Image::new(res, res, 3);
        let mut filled = vec![false; res * res];
        for i in 0..res * res {
            for k in 0..3 {
                kc.data[i * 3 + k] = srgb_decode(kc_rgba.data[i * 4 + k]);
            }
            filled[i] = kc_rgba.data[i * 4 + 3] > 0.5;
        }
        let maps = Self {
            resolution: res,
            kc,
            km: read("km.png", 1)?,
            kr: read("kr.png", 1)?,
            normal: read("normal.png", 3)?,
            filled,
        };
        if [&maps.km, &maps.kr, &maps.normal].iter().any(|m| m.width != res) {
            return Err(FieldError::Checkpoint("material maps differ in size".into()));
        }
        Ok(maps)
    }

    pub fn coverage(&self) -> f64 {
        self.filled.iter().filter(|&&f| f).count() as f64 / self.filled.len() as f64
    }
}

/// Material lookups from baked maps with bilinear filtering over filled
/// texels.
#[derive(Debug, Clone)]
pub struct BakedMaterial {
    pub maps: MaterialMaps,
}

impl BakedMaterial {
    pub fn new(maps: MaterialMaps) -> Self {
        Self { maps }
    }

    pub fn sample(&self, uv: DVec2) -> MaterialSample {
        let res = self.maps.resolution;
        let fx = (uv.x * res as f64 - 0.5).clamp(0.0, (res - 1) as f64);
        let fy = ((1.0 - uv.y) * res as f64 - 0.5).clamp(0.0, (res - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(res - 1), (y0 + 1).min(res - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let taps = [
            (x0, y0, (1.0 - tx) * (1.0 - ty)),
            (x1, y0, tx * (1.0 - ty)),
            (x0, y1, (1.0 - tx) * ty),
            (x1, y1, tx * ty),
        ];
        let mut acc = [0.0; 8];
        let mut wsum = 0.0;
        for (x, y, w) in taps {
            let i = y * res + x;
            if !self.maps.filled[i] || w == 0.0 {
                continue;
            }
            let m = &self.maps;
            let vals = [
                m.kc.data[i * 3],
                m.kc.data[i * 3 + 1],
                m.kc.data[i * 3 + 2],
                m.km.data[i],
                m.kr.data[i],
                m.normal.data[i * 3],
                m.normal.data[i * 3 + 1],
                m.normal.data[i * 3 + 2],
            ];
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += w * v;
            }
            wsum += w;
        }
        if wsum == 0.0 {
            return MaterialSample::new(DVec3::ZERO, 0.0, 1.0);
        }
        let a = acc.map(|v| v / wsum);
        MaterialSample {
            kc: DVec3::new(a[0], a[1], a[2]),
            km: a[3],
            kr: a[4],
            kn: decode_normal(DVec3::new(a[5], a[6], a[7])),
        }
    }
}

impl MaterialField for BakedMaterial {
    fn materials(&self, points: &[SurfacePoint]) -> Vec<MaterialSample> {
        points.iter().map(|p| self.sample(p.uv)).collect()
    }
}
