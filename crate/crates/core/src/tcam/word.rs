use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A ternary word of up to 64 symbols from `{0, 1, x}`.
///
/// `care` has a 1 wherever the symbol is a concrete bit; positions with
/// `care = 0` are wildcards and match both stored values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TernaryWord {
    width: u32,
    value: u64,
    care: u64,
}

#[inline]
pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl TernaryWord {
    pub fn new(width: u32, value: u64, care: u64) -> Result<Self> {
        if width == 0 || width > 64 {
            return Err(Error::Argument(format!(
                "ternary width {width} not in 1..=64"
            )));
        }
        let m = width_mask(width);
        Ok(Self {
            width,
            value: value & care & m,
            care: care & m,
        })
    }

    /// All positions concrete.
    pub fn binary(width: u32, value: u64) -> Result<Self> {
        Self::new(width, value, u64::MAX)
    }

    pub fn all_x(width: u32) -> Result<Self> {
        Self::new(width, 0, 0)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn care(&self) -> u64 {
        self.care
    }

    pub fn wildcard_count(&self) -> u32 {
        self.width - self.care.count_ones()
    }

    /// Symbol at bit position `i` (0 = least significant).
    pub fn symbol(&self, i: u32) -> char {
        if self.care >> i & 1 == 0 {
            'x'
        } else if self.value >> i & 1 == 1 {
            '1'
        } else {
            '0'
        }
    }

    /// Does a fully binary stored word match this query?
    #[inline]
    pub fn matches(&self, stored: u64) -> bool {
        (stored ^ self.value) & self.care == 0
    }
}

impl fmt::Display for TernaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            write!(f, "{}", self.symbol(i))?;
        }
        Ok(())
    }
}

/// Parses most-significant symbol first, e.g. `"1x10"`. Underscores are
/// ignored.
impl FromStr for TernaryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let symbols: Vec<char> = s.chars().filter(|&c| c != '_').collect();
        let width = symbols.len() as u32;
        let mut value = 0u64;
        let mut care = 0u64;
        for c in symbols {
            value <<= 1;
            care <<= 1;
            match c {
                '0' => care |= 1,
                '1' => {
                    care |= 1;
                    value |= 1;
                }
                'x' | 'X' => {}
                other => return Err(Error::Argument(format!("bad ternary symbol {other:?}"))),
            }
        }
        Self::new(width, value, care)
    }
}
