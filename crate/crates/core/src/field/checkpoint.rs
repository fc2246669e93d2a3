//! Field checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "RLTXFLD\0"
//! version    u32      1
//! config     6 x u32  levels, features_per_level, log2_table_size,
//!                     base_resolution, finest_resolution, hidden
//! tensors    u32      count, then per tensor:
//!                     name_len u32, name (utf-8), ndim u32, dims ndim x u32
//! data       f32      every tensor's values in table order, row-major
//! ```

use std::path::Path;

use super::{FieldConfig, FieldError, TextureField};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"RLTXFLD\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn shape_table(field: &TextureField) -> Vec<(String, Vec<u32>)> {
    let s = field.decoder_shape();
    let (i, h) = (s.input as u32, s.hidden as u32);
    let mut t = vec![
        ("decoder.w1".to_string(), vec![h, i]),
        ("decoder.b1".to_string(), vec![h]),
        ("decoder.w2".to_string(), vec![super::decoder::OUTPUTS as u32, h]),
        ("decoder.b2".to_string(), vec![super::decoder::OUTPUTS as u32]),
    ];
    for (l, lv) in field.layout().levels.iter().enumerate() {
        t.push((format!("grid.level{l}"), vec![lv.size as u32, field.layout().features as u32]));
    }
    t
}

pub fn save_checkpoint(field: &TextureField, path: &Path) -> Result<(), FieldError> {
    let c = field.config();
    let mut out = Vec::with_capacity(64 + field.param_count() * 4);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [
        c.levels,
        c.features_per_level,
        c.log2_table_size as usize,
        c.base_resolution,
        c.finest_resolution,
        c.hidden,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let table = shape_table(field);
    out.extend_from_slice(&(table.len() as u32).to_le_bytes());
    for (name, dims) in &table {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    for &p in field.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    std::fs::write(path, out).map_err(|source| FieldError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FieldError> {
        if self.pos + n > self.bytes.len() {
            return Err(FieldError::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FieldError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<TextureField, FieldError> {
    let bytes = std::fs::read(path).map_err(|source| FieldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(FieldError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(FieldError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut cfg = [0u32; 6];
    for v in &mut cfg {
        *v = r.u32()?;
    }
    let config = FieldConfig {
        levels: cfg[0] as usize,
        features_per_level: cfg[1] as usize,
        log2_table_size: cfg[2],
        base_resolution: cfg[3] as usize,
        finest_resolution: cfg[4] as usize,
        hidden: cfg[5] as usize,
        ..FieldConfig::default()
    };
    if config.levels == 0 || config.features_per_level == 0 || config.log2_table_size > 24 || config.base_resolution == 0
    {
        return Err(FieldError::Checkpoint("invalid field configuration".into()));
    }
    let count = r.u32()? as usize;
    let mut table = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| FieldError::Checkpoint("tensor name is not utf-8".into()))?
            .to_string();
        let ndim = r.u32()? as usize;
        let dims = (0..ndim).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        table.push((name, dims));
    }
    let total: usize = table.iter().map(|(_, d)| d.iter().map(|&x| x as usize).product::<usize>()).sum();
    let data = r.take(total * 4)?;
    let params: Vec<f64> = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let field = TextureField::from_params(config, params)?;
    if shape_table(&field) != table {
        return Err(FieldError::Checkpoint("shape table does not match configuration".into()));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FieldConfig {
        FieldConfig {
            levels: 3,
            log2_table_size: 9,
            base_resolution: 4,
            finest_resolution: 16,
            hidden: 6,
            table_init: 0.3,
            ..FieldConfig::default()
        }
    }

    #[test]
    fn round_trip_preserves_f32_parameters() {
        let field = TextureField::new(small(), 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        save_checkpoint(&field, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.param_count(), field.param_count());
        for (a, b) in back.params().iter().zip(field.params()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"RLTXFLD\0");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    }

    #[test]
    fn corrupt_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        save_checkpoint(&TextureField::new(small(), 1), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(FieldError::Checkpoint(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(FieldError::Checkpoint(_))));
    }
}
