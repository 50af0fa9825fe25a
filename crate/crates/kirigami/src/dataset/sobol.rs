//! Unscrambled base-2 Sobol points (Joe-Kuo direction numbers, gray-code order).

use super::sobol_table::{MAX_DIM, TABLE};
use crate::error::{Error, Result};

const BITS: usize = 32;

/// Candidates reserved per (seed, split) block.
pub const BLOCK: u64 = 1 << 22;

#[derive(Debug, Clone)]
pub struct Sobol {
    dim: usize,
    v: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!("Sobol dimension {dim} outside 1..={MAX_DIM}")));
        }
        let mut v = Vec::with_capacity(dim);
        for (d, &(poly, init)) in TABLE.iter().take(dim).enumerate() {
            let mut dirs = [0u32; BITS];
            if d == 0 {
                for (j, item) in dirs.iter_mut().enumerate() {
                    *item = 1 << (BITS - 1 - j);
                }
            } else {
                let s = (32 - poly.leading_zeros() - 1) as usize;
                for j in 0..s {
                    dirs[j] = init[j] << (BITS - 1 - j);
                }
                for j in s..BITS {
                    let mut nv = dirs[j - s] ^ (dirs[j - s] >> s);
                    for k in 1..s {
                        if (poly >> (s - k)) & 1 == 1 {
                            nv ^= dirs[j - k];
                        }
                    }
                    dirs[j] = nv;
                }
            }
            v.push(dirs);
        }
        Ok(Self { dim, v, state: vec![0; dim], index: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index of the next point to be returned.
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Jump so the next point returned is point `index` of the sequence.
    pub fn seek(&mut self, index: u64) {
        let gray = index ^ (index >> 1);
        for d in 0..self.dim {
            let mut x = 0u32;
            for b in 0..BITS {
                if (gray >> b) & 1 == 1 {
                    x ^= self.v[d][b];
                }
            }
            self.state[d] = x;
        }
        self.index = index;
    }

    /// Next point in [0, 1)^dim.
    pub fn next_unit(&mut self) -> Vec<f64> {
        let out = self.state.iter().map(|&x| x as f64 / 4294967296.0).collect();
        let c = (!self.index).trailing_zeros() as usize;
        for d in 0..self.dim {
            self.state[d] ^= self.v[d][c.min(BITS - 1)];
        }
        self.index += 1;
        out
    }
}

/// Deterministic stream of points in [-1, 1]^dim. The seed picks a disjoint block of
/// sequence indices; the origin point is skipped, so dimension 1 starts at 0.5 -> 0.0.
pub fn sobol_stream(dim: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut s = Sobol::new(dim)?;
    s.seek(1 + seed * BLOCK);
    Ok((0..count).map(|_| s.next_unit().into_iter().map(|u| 2.0 * u - 1.0).collect()).collect())
}
