//! Multi-resolution hash encoding over the cube `[-1, 1]^3`.

use glam::DVec3;
use rayon::prelude::*;

use super::FieldConfig;

const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub resolution: usize,
    /// Rows in this level's table.
    pub size: usize,
    /// Index of the level's first parameter in the flat table array.
    pub offset: usize,
    /// Direct indexing when every lattice vertex fits in the table.
    pub dense: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub levels: Vec<Level>,
    pub features: usize,
    pub total: usize,
}

/// Lattice corners touched by one point on one level.
#[derive(Debug, Clone, Copy)]
pub struct Corners {
    pub rows: [usize; 8],
    pub weights: [f64; 8],
}

impl GridLayout {
    pub fn new(cfg: &FieldConfig) -> Self {
        let max_rows = 1usize << cfg.log2_table_size;
        let growth = if cfg.levels > 1 {
            ((cfg.finest_resolution as f64).ln() - (cfg.base_resolution as f64).ln()) / (cfg.levels - 1) as f64
        } else {
            0.0
        }
        .exp();
        let mut offset = 0;
        let levels = (0..cfg.levels)
            .map(|l| {
                let resolution = (cfg.base_resolution as f64 * growth.powi(l as i32) + 1e-9).floor() as usize;
                let vertices = (resolution + 1).pow(3);
                let dense = vertices <= max_rows;
                let size = if dense { vertices } else { max_rows };
                let level = Level {
                    resolution,
                    size,
                    offset,
                    dense,
                };
                offset += size * cfg.features_per_level;
                level
            })
            .collect();
        GridLayout {
            levels,
            features: cfg.features_per_level,
            total: offset,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.levels.len() * self.features
    }

    fn row(level: &Level, c: [u32; 3]) -> usize {
        if level.dense {
            let n = level.resolution + 1;
            c[0] as usize + n * (c[1] as usize + n * c[2] as usize)
        } else {
            let h = c[0].wrapping_mul(PRIMES[0]) ^ c[1].wrapping_mul(PRIMES[1]) ^ c[2].wrapping_mul(PRIMES[2]);
            h as usize & (level.size - 1)
        }
    }

    /// Trilinear corners of `p` (mapped from `[-1, 1]^3`, clamped) on `level`.
    pub fn corners(&self, level: usize, p: DVec3) -> Corners {
        let lv = &self.levels[level];
        let x = ((p + DVec3::ONE) * 0.5).clamp(DVec3::ZERO, DVec3::ONE) * lv.resolution as f64;
        let cell = x.floor().min(DVec3::splat((lv.resolution - 1) as f64));
        let f = x - cell;
        let base = [cell.x as u32, cell.y as u32, cell.z as u32];
        let mut out = Corners {
            rows: [0; 8],
            weights: [0.0; 8],
        };
        for k in 0..8 {
            let bit = [k & 1, (k >> 1) & 1, (k >> 2) & 1];
            let mut w = 1.0;
            let mut c = base;
            for a in 0..3 {
                if bit[a] == 1 {
                    w *= f[a];
                    c[a] += 1;
                } else {
                    w *= 1.0 - f[a];
                }
            }
            out.rows[k] = Self::row(lv, c);
            out.weights[k] = w;
        }
        out
    }

    /// Writes the `levels * features` encoding of `p` into `out`.
    pub fn encode(&self, tables: &[f64], p: DVec3, out: &mut [f64]) {
        let fdim = self.features;
        for (l, lv) in self.levels.iter().enumerate() {
            let c = self.corners(l, p);
            let dst = &mut out[l * fdim..(l + 1) * fdim];
            dst.fill(0.0);
            for k in 0..8 {
                let row = &tables[lv.offset + c.rows[k] * fdim..][..fdim];
                for (d, &v) in dst.iter_mut().zip(row) {
                    *d += c.weights[k] * v;
                }
            }
        }
    }

    /// Accumulates table gradients for points `ps` given per-point feature
    /// gradients `g_features` (row-major, `output_dim` per point). Levels are
    /// processed in parallel; within a level points are visited in order.
    pub fn backward(&self, ps: &[DVec3], g_features: &[f64], grad_tables: &mut [f64]) {
        let fdim = self.features;
        let odim = self.output_dim();
        let mut slices = Vec::with_capacity(self.levels.len());
        let mut rest = grad_tables;
        for lv in &self.levels {
            let (head, tail) = rest.split_at_mut(lv.size * fdim);
            slices.push(head);
            rest = tail;
        }
        slices.into_par_iter().enumerate().for_each(|(l, dst)| {
            for (i, &p) in ps.iter().enumerate() {
                let g = &g_features[i * odim + l * fdim..][..fdim];
                if g.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let c = self.corners(l, p);
                for k in 0..8 {
                    let row = &mut dst[c.rows[k] * fdim..][..fdim];
                    for (r, &gv) in row.iter_mut().zip(g) {
                        *r += c.weights[k] * gv;
                    }
                }
            }
        });
    }
}
