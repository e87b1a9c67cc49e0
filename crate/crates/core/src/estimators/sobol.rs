//! Sobol low-discrepancy points with a seeded digital shift, mapped to
//! standard-normal deviates, plus a pseudorandom alternative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sobol_data::DIRECTION_DATA;
use crate::error::{Error, Result};

/// Number of dimensions with bundled direction numbers.
pub const MAX_SOBOL_DIM: usize = DIRECTION_DATA.len();

const BITS: usize = 32;

/// Source of the Monte Carlo perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    #[default]
    Sobol,
    Pseudorandom,
}

/// Direction integers `v_k`, `k = 1..32`, for each dimension.
#[derive(Debug, Clone)]
pub struct SobolTable {
    directions: Vec<[u32; BITS]>,
}

impl SobolTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_SOBOL_DIM {
            return Err(Error::InvalidArgument(format!(
                "Sobol dimension must be in 1..={MAX_SOBOL_DIM}, got {dim}"
            )));
        }
        let directions = DIRECTION_DATA[..dim]
            .iter()
            .enumerate()
            .map(|(j, &(poly, m_init))| direction_integers(j, poly, m_init))
            .collect();
        Ok(SobolTable { directions })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Unshifted point `index` in gray-code order, as 32-bit integers.
    pub fn point_bits(&self, index: u64) -> Vec<u32> {
        let gray = index ^ (index >> 1);
        self.directions
            .iter()
            .map(|v| {
                let mut x = 0u32;
                let mut g = gray;
                let mut k = 0;
                while g != 0 && k < BITS {
                    if g & 1 == 1 {
                        x ^= v[k];
                    }
                    g >>= 1;
                    k += 1;
                }
                x
            })
            .collect()
    }

    /// Unshifted point `index` in `[0, 1)^dim`.
    pub fn point(&self, index: u64) -> Vec<f64> {
        self.point_bits(index)
            .into_iter()
            .map(|b| b as f64 / 4_294_967_296.0)
            .collect()
    }
}

fn direction_integers(dim_index: usize, poly: u32, m_init: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (BITS - 1 - k);
        }
        return v;
    }
    let s = (32 - poly.leading_zeros() - 1) as usize;
    let a = (poly >> 1) & ((1u32 << (s - 1)) - 1);
    let mut m = vec![0u64; BITS];
    for (k, &mk) in m_init.iter().enumerate().take(s.min(BITS)) {
        m[k] = mk as u64;
    }
    for k in s..BITS {
        let mut next = m[k - s] ^ (m[k - s] << s);
        for l in 1..s {
            if (a >> (s - 1 - l)) & 1 == 1 {
                next ^= m[k - l] << l;
            }
        }
        m[k] = next;
    }
    for k in 0..BITS {
        v[k] = (m[k] << (BITS - 1 - k)) as u32;
    }
    v
}

/// Standard-normal quantile function.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(p)
}

/// Generator of standard-normal perturbation rows, addressable by index so
/// that rows can be produced in parallel and any prefix is reproducible.
#[derive(Debug, Clone)]
pub struct NormalStream {
    kind: SequenceKind,
    seed: u64,
    dim: usize,
    table: Option<SobolTable>,
    shift: Vec<u32>,
}

impl NormalStream {
    pub fn new(kind: SequenceKind, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let (table, shift) = match kind {
            SequenceKind::Sobol => {
                let table = SobolTable::new(dim)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let shift = (0..dim).map(|_| rng.random::<u32>()).collect();
                (Some(table), shift)
            }
            SequenceKind::Pseudorandom => (None, Vec::new()),
        };
        Ok(NormalStream { kind, seed, dim, table, shift })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row `index` (0-based) of the deviate matrix. For Sobol streams this is
    /// sequence point `index + 1`; the all-zero initial point is skipped.
    pub fn row(&self, index: u64) -> Vec<f64> {
        match self.kind {
            SequenceKind::Sobol => {
                let table = self.table.as_ref().expect("sobol table");
                table
                    .point_bits(index + 1)
                    .into_iter()
                    .zip(&self.shift)
                    .map(|(b, s)| inverse_normal_cdf(((b ^ s) as f64 + 0.5) / 4_294_967_296.0))
                    .collect()
            }
            SequenceKind::Pseudorandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(index);
                (0..self.dim).map(|_| rng.sample(StandardNormal)).collect()
            }
        }
    }
}

/// `count × dim` standard-normal deviates from the shifted Sobol sequence.
pub fn sobol_normal(count: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let stream = NormalStream::new(SequenceKind::Sobol, dim, seed)?;
    Ok((0..count as u64).map(|i| stream.row(i)).collect())
}
