//! Lighting-pool manifest: one `.hdr` path per line with an optional fixed
//! rotation in radians. `#` starts a comment; relative paths resolve against
//! the manifest's directory.

use std::path::{Path, PathBuf};

use super::{EnvironmentLight, LightError};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub rotation: f64,
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>, LightError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let path = PathBuf::from(parts.next().unwrap());
        let rotation = match parts.next() {
            Some(r) => r.parse::<f64>().map_err(|_| LightError::Manifest {
                line: i + 1,
                message: format!("invalid rotation '{r}'"),
            })?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(LightError::Manifest {
                line: i + 1,
                message: "expected '<path> [rotation]'".into(),
            });
        }
        let path = if path.is_relative() {
            base_dir.join(path)
        } else {
            path
        };
        entries.push(ManifestEntry { path, rotation });
    }
    if entries.is_empty() {
        return Err(LightError::Manifest {
            line: 0,
            message: "manifest lists no lights".into(),
        });
    }
    Ok(entries)
}

/// Loads every light named in the manifest at `path`.
pub fn load_light_pool(path: &Path) -> Result<Vec<EnvironmentLight>, LightError> {
    let text = std::fs::read_to_string(path).map_err(|source| LightError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)?
        .into_iter()
        .map(|e| EnvironmentLight::load(&e.path)?.transformed(e.rotation, 1.0))
        .collect()
}
