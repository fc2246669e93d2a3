//! Wavefront OBJ subset: `v`, `vt`, `vn` and triangular `f` records.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use glam::{DVec2, DVec3};

use super::{GeometryError, Mesh};

pub fn load_mesh(path: &Path) -> Result<Mesh, GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

fn parse_floats<const N: usize>(parts: &[&str], line: usize) -> Result<[f64; N], GeometryError> {
    if parts.len() < N {
        return Err(GeometryError::Parse {
            line,
            message: format!("expected {N} components"),
        });
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| GeometryError::Parse {
            line,
            message: format!("invalid number '{p}'"),
        })?;
    }
    Ok(out)
}

fn resolve(raw: &str, count: usize, line: usize) -> Result<usize, GeometryError> {
    let i: i64 = raw.parse().map_err(|_| GeometryError::Parse {
        line,
        message: format!("invalid index '{raw}'"),
    })?;
    let idx = if i < 0 { count as i64 + i } else { i - 1 };
    if idx < 0 || idx as usize >= count {
        return Err(GeometryError::Parse {
            line,
            message: format!("index {i} out of range ({count} available)"),
        });
    }
    Ok(idx as usize)
}

/// Parses OBJ text into a normalized [`Mesh`]. Each distinct
/// position/uv/normal triple becomes its own vertex.
pub fn parse_obj(text: &str) -> Result<Mesh, GeometryError> {
    let mut positions = Vec::new();
    let mut texcoords = Vec::new();
    let mut obj_normals = Vec::new();
    let mut corner_map: HashMap<(usize, usize, Option<usize>), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    let mut all_have_normals = true;
    let mut faces = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut parts = content.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let rest: Vec<&str> = parts.collect();
        match tag {
            "v" => {
                let [x, y, z] = parse_floats::<3>(&rest, line)?;
                positions.push(DVec3::new(x, y, z));
            }
            "vt" => {
                let [u, v] = parse_floats::<2>(&rest, line)?;
                texcoords.push(DVec2::new(u, v));
            }
            "vn" => {
                let [x, y, z] = parse_floats::<3>(&rest, line)?;
                obj_normals.push(DVec3::new(x, y, z));
            }
            "f" => {
                if rest.len() != 3 {
                    return Err(GeometryError::NonTriangulated {
                        line,
                        corners: rest.len(),
                    });
                }
                let mut face = [0u32; 3];
                for (slot, corner) in face.iter_mut().zip(&rest) {
                    let mut fields = corner.split('/');
                    let v = resolve(fields.next().unwrap_or(""), positions.len(), line)?;
                    let vt = match fields.next() {
                        Some(s) if !s.is_empty() => resolve(s, texcoords.len(), line)?,
                        _ => return Err(GeometryError::MissingUvs),
                    };
                    let vn = match fields.next() {
                        Some(s) if !s.is_empty() => Some(resolve(s, obj_normals.len(), line)?),
                        _ => None,
                    };
                    all_have_normals &= vn.is_some();
                    let key = (v, vt, vn);
                    *slot = *corner_map.entry(key).or_insert_with(|| {
                        vertices.push(positions[v]);
                        uvs.push(texcoords[vt]);
                        normals.push(vn.map(|n| obj_normals[n]).unwrap_or(DVec3::ZERO));
                        (vertices.len() - 1) as u32
                    });
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(GeometryError::Empty);
    }
    let normals = all_have_normals.then_some(normals);
    let mesh = Mesh::from_parts(vertices, faces, uvs, normals, true)?;
    if mesh.total_area() <= 0.0 {
        return Err(GeometryError::ZeroArea);
    }
    Ok(mesh)
}

/// Serializes a mesh with one `v`/`vt`/`vn` record per vertex.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.uvs {
        let _ = writeln!(s, "vt {} {}", t.x, t.y);
    }
    for n in &mesh.normals {
        let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
    }
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| i + 1);
        let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
    }
    s
}
