//! Query generation for the two search modes.

use crate::error::{Error, Result};
use crate::tcam::word::{width_mask, TernaryWord};

/// Ones from bit 0 up to and including the most significant set bit of
/// `delta`: `2^(p + 1) - 1`.
pub fn prefix_mask(delta: u32) -> Result<u32> {
    if delta == 0 {
        return Err(Error::Domain("radius must be at least one raw unit".into()));
    }
    let p = 31 - delta.leading_zeros();
    Ok(if p == 31 {
        u32::MAX
    } else {
        (1u32 << (p + 1)) - 1
    })
}

/// Prefix query: positions under the mask become `x`, the rest carry the
/// representative's bits.
pub fn frnn_query(v_raw: u32, mask: u32) -> TernaryWord {
    frnn_query_width(v_raw as u64, mask as u64, 32).expect("32 is a valid width")
}

pub fn frnn_query_width(v: u64, mask: u64, width: u32) -> Result<TernaryWord> {
    TernaryWord::new(width, v, !mask & width_mask(width))
}

/// Inclusive value range `[lo, hi]` matched by the prefix query of `v`
/// under `mask`: the aligned block of width `mask + 1` containing `v`.
pub fn prefix_block(v: u32, mask: u32) -> (u32, u32) {
    let lo = v & !mask;
    (lo, lo | mask)
}
