//! Unsigned 32-bit fixed-point priority encoding.
//!
//! The default layout is Q16.16: a raw word `r` decodes to `r / 2^16`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FRAC_BITS: u32 = 16;

/// A priority as stored in the replay memory and in every TCAM row.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct PriorityValue(pub u32);

impl PriorityValue {
    #[inline]
    pub fn raw(self) -> u32 {
        self.0
    }
}

/// Fixed-point codec with a configurable number of fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codec {
    frac_bits: u32,
}

impl Default for Codec {
    fn default() -> Self {
        Self {
            frac_bits: DEFAULT_FRAC_BITS,
        }
    }
}

impl Codec {
    pub fn new(frac_bits: u32) -> Result<Self> {
        if frac_bits > 31 {
            return Err(Error::Argument(format!(
                "frac_bits must be <= 31, got {frac_bits}"
            )));
        }
        Ok(Self { frac_bits })
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Real value of one raw unit.
    #[inline]
    pub fn resolution(&self) -> f64 {
        1.0 / self.scale()
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        (1u64 << self.frac_bits) as f64
    }

    /// Largest representable real value.
    pub fn max_value(&self) -> f64 {
        u32::MAX as f64 / self.scale()
    }

    #[inline]
    pub fn decode(&self, p: PriorityValue) -> f64 {
        p.0 as f64 / self.scale()
    }

    /// Round-to-nearest encoding. Rejects negative, non-finite and
    /// out-of-range inputs.
    pub fn encode(&self, v: f64) -> Result<PriorityValue> {
        self.check(v)?;
        Ok(PriorityValue((v * self.scale()).round() as u32))
    }

    /// Truncating encoding, used for query words so that the encoded
    /// representative never exceeds its real value.
    pub fn encode_floor(&self, v: f64) -> Result<PriorityValue> {
        self.check(v)?;
        Ok(PriorityValue((v * self.scale()).floor() as u32))
    }

    /// Converts a real length (e.g. a search radius) into raw units without
    /// range checks on the result beyond saturation.
    pub fn to_raw_units(&self, v: f64) -> f64 {
        v * self.scale()
    }

    fn check(&self, v: f64) -> Result<()> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("cannot encode {v}")));
        }
        if (v * self.scale()).round() > u32::MAX as f64 {
            return Err(Error::Domain(format!("{v} exceeds fixed-point range")));
        }
        Ok(())
    }
}
