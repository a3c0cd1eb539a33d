use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;
const PRIMES: [u64; MAX_DIM] = [2, 3, 5, 7];
/// Digits kept per base so that b^digits is about 2^52.
const DIGITS: [usize; MAX_DIM] = [52, 33, 23, 19];
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scrambling {
    Raw,
    Owen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HaltonSampler {
    dim: usize,
    seed: u64,
    mode: Scrambling,
}

#[inline]
pub(crate) fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Hash of several words, used to derive independent seeds.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15, |h, &w| mix64(h ^ mix64(w.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// The image of `digit` under a pseudo-random permutation of 0..base
/// selected by `key`.
#[inline]
fn permute_digit(digit: u64, base: u64, key: u64) -> u64 {
    if base == 2 {
        return digit ^ (key & 1);
    }
    let mut perm = [0u64; 8];
    for (i, p) in perm.iter_mut().enumerate().take(base as usize) {
        *p = i as u64;
    }
    let mut state = key;
    for i in (1..base as usize).rev() {
        state = mix64(state.wrapping_add(i as u64));
        let j = (state % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    perm[digit as usize]
}

impl HaltonSampler {
    pub fn new(dim: usize, mode: Scrambling, seed: u64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        Ok(HaltonSampler { dim, seed, mode })
    }

    pub fn raw(dim: usize) -> Result<Self> {
        Self::new(dim, Scrambling::Raw, 0)
    }

    pub fn owen(dim: usize, seed: u64) -> Result<Self> {
        Self::new(dim, Scrambling::Owen, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Coordinate `d` of the point with the given index. Index 0 is allowed
    /// here; it is the origin in raw mode.
    pub fn component(&self, index: u64, d: usize) -> f64 {
        let base = PRIMES[d];
        let inv = 1.0 / base as f64;
        match self.mode {
            Scrambling::Raw => {
                let mut i = index;
                let mut f = inv;
                let mut v = 0.0;
                while i > 0 {
                    v += (i % base) as f64 * f;
                    i /= base;
                    f *= inv;
                }
                v
            }
            Scrambling::Owen => {
                let mut i = index;
                let mut prefix = mix64(self.seed ^ mix64(d as u64 + 1));
                let mut f = inv;
                let mut v = 0.0;
                for _ in 0..DIGITS[d] {
                    let digit = i % base;
                    i /= base;
                    v += permute_digit(digit, base, prefix) as f64 * f;
                    prefix = mix64(prefix ^ (digit + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                    f *= inv;
                }
                v.min(BELOW_ONE)
            }
        }
    }

    /// The point with the given index; only the first `dim` entries are set.
    pub fn point4(&self, index: u64) -> [f64; MAX_DIM] {
        let mut p = [0.0; MAX_DIM];
        for (d, slot) in p.iter_mut().enumerate().take(self.dim) {
            *slot = self.component(index, d);
        }
        p
    }
}

/// Point number `index` (starting at 1) of the sequence.
pub fn halton(index: u64, sampler: &HaltonSampler) -> Result<Vec<f64>> {
    if index == 0 {
        return Err(Error::invalid("Halton indices start at 1"));
    }
    Ok(sampler.point4(index)[..sampler.dim].to_vec())
}

/// Axis-aligned box of dimension 1 to 4.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::invalid("region bounds differ in dimension"));
        }
        if lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(lo.len()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid(format!("degenerate region {lo:?}..{hi:?}")));
        }
        Ok(Region { lo, hi })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Affine image of a unit-cube point.
    pub fn map(&self, u: &[f64]) -> [f64; MAX_DIM] {
        let mut p = [0.0; MAX_DIM];
        for d in 0..self.dim() {
            p[d] = self.lo[d] + u[d] * (self.hi[d] - self.lo[d]);
        }
        p
    }
}

/// Mean of `f` over `n` scrambled Halton points mapped into `region`.
pub fn qmc_integrate<F: FnMut(&[f64]) -> f64>(mut f: F, region: &Region, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("QMC point count must be at least 1"));
    }
    let sampler = HaltonSampler::owen(region.dim(), seed)?;
    let dim = region.dim();
    let mut sum = 0.0;
    for i in 0..n as u64 {
        let u = sampler.point4(i);
        let p = region.map(&u);
        sum += f(&p[..dim]);
    }
    Ok(sum / n as f64)
}
