//! Particle configurations and the enumerated state space.

use crate::error::{Error, Result};
use crate::heat::LatticeSize;

/// Largest bulk whose full law can be held in memory.
pub const MAX_CHAIN_SITES: usize = 22;

/// Occupation bits of the bulk `{1, ..., n-1}`; site `x` is bit `x - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    len: usize,
    words: Vec<u64>,
}

impl Configuration {
    pub fn empty(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut c = Self::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            c.set(i + 1, b);
        }
        c
    }

    /// The configuration whose bit pattern is `index`.
    pub fn from_index(index: usize, len: usize) -> Self {
        let mut c = Self::empty(len);
        if len > 0 {
            c.words[0] = index as u64;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Occupation of site `x` in `1..=len`.
    #[inline]
    pub fn get(&self, x: usize) -> bool {
        let i = x - 1;
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, occupied: bool) {
        let i = x - 1;
        let bit = 1u64 << (i & 63);
        if occupied {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    /// `eta^x`: flip the occupation of site `x`.
    #[inline]
    pub fn flip(&mut self, x: usize) {
        let i = x - 1;
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    /// `eta^{x,y}`: exchange the occupations of sites `x` and `y`.
    #[inline]
    pub fn swap(&mut self, x: usize, y: usize) {
        if self.get(x) != self.get(y) {
            self.flip(x);
            self.flip(y);
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn bits(&self) -> Vec<bool> {
        (1..=self.len).map(|x| self.get(x)).collect()
    }

    /// Index in the enumerated state space; `None` beyond 64 sites.
    pub fn index(&self) -> Option<usize> {
        match self.words.len() {
            0 => Some(0),
            1 => usize::try_from(self.words[0]).ok(),
            _ => None,
        }
    }
}

/// `Omega_n = {0,1}^{n-1}`, indexed by bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    n: LatticeSize,
}

impl StateSpace {
    pub fn new(n: LatticeSize) -> Result<Self> {
        let sites = n.bulk_len();
        if sites > MAX_CHAIN_SITES {
            return Err(Error::TooLarge {
                sites,
                cap: MAX_CHAIN_SITES,
                hint: "use the grid or Monte Carlo methods for larger systems",
            });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> LatticeSize {
        self.n
    }

    pub fn sites(&self) -> usize {
        self.n.bulk_len()
    }

    pub fn size(&self) -> usize {
        1 << self.sites()
    }

    pub fn configuration(&self, index: usize) -> Configuration {
        Configuration::from_index(index, self.sites())
    }
}
