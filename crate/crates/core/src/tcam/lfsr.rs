//! 32-bit Fibonacci LFSR and the uniform random number generator built on
//! it.

use crate::error::{Error, Result};

/// Fibonacci LFSR for `x^32 + x^22 + x^2 + x + 1` (taps 32, 22, 2, 1),
/// a maximal-length polynomial: every nonzero state recurs with period
/// `2^32 - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lfsr32 {
    state: u32,
}

impl Lfsr32 {
    pub fn new(seed: u32) -> Result<Self> {
        if seed == 0 {
            return Err(Error::Domain("LFSR seed must be nonzero".into()));
        }
        Ok(Self { state: seed })
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    /// One shift. Tap `t` is state bit `32 - t`; the feedback bit enters
    /// at the top.
    #[inline]
    pub fn step(&mut self) -> u32 {
        let s = self.state;
        let bit = (s ^ (s >> 10) ^ (s >> 30) ^ (s >> 31)) & 1;
        self.state = (s >> 1) | (bit << 31);
        self.state
    }
}

/// Uniform random source drawing whole 32-bit words from an [`Lfsr32`].
///
/// Each word advances the register 32 times so consecutive words share no
/// bits.
#[derive(Debug, Clone)]
pub struct Urng {
    lfsr: Lfsr32,
}

impl Urng {
    pub fn new(seed: u32) -> Result<Self> {
        Ok(Self {
            lfsr: Lfsr32::new(seed)?,
        })
    }

    pub fn next_word(&mut self) -> u32 {
        for _ in 0..31 {
            self.lfsr.step();
        }
        self.lfsr.step()
    }

    /// `lo + (word mod (hi - lo))`. Modulo bias is at most
    /// `(hi - lo) / 2^32` and is accepted.
    pub fn below_range(&mut self, lo: u32, hi: u32) -> Result<u32> {
        if lo >= hi {
            return Err(Error::Argument(format!("empty range [{lo}, {hi})")));
        }
        Ok(lo + self.next_word() % (hi - lo))
    }

    /// Integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0 && n <= u32::MAX as usize);
        (self.next_word() as u64 % n as u64) as usize
    }

    /// `lo + (word / 2^32) * (hi - lo)`, always inside `[lo, hi)`.
    pub fn real_range(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::Argument(format!("empty range [{lo}, {hi})")));
        }
        let u = self.next_word() as f64 / 4_294_967_296.0;
        let v = lo + u * (hi - lo);
        Ok(if v < hi { v } else { hi.next_down() })
    }
}
