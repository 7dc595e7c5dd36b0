use crate::error::{Error, Result};
use crate::tcam::word::{width_mask, TernaryWord};

pub const ROWS: usize = 64;
pub const COLUMNS: u32 = 64;

/// One 64 x 64 TCAM array.
///
/// Each row holds one priority in its low `data_bits` columns; the upper
/// columns are stored as `x` so they never cause a mismatch.
#[derive(Debug, Clone)]
pub struct TcamArray {
    value: [u64; ROWS],
    care: [u64; ROWS],
    valid: u64,
}

impl Default for TcamArray {
    fn default() -> Self {
        Self {
            value: [0; ROWS],
            care: [0; ROWS],
            valid: 0,
        }
    }
}

impl TcamArray {
    pub fn write(&mut self, row: usize, value: u64, care: u64) {
        self.value[row] = value & care;
        self.care[row] = care;
        self.valid |= 1 << row;
    }

    pub fn set_valid(&mut self, row: usize, valid: bool) {
        if valid {
            self.valid |= 1 << row;
        } else {
            self.valid &= !(1 << row);
        }
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.valid >> row & 1 == 1
    }

    pub fn row(&self, row: usize) -> (u64, u64) {
        (self.value[row], self.care[row])
    }

    /// Mismatching cells between a row and a query: both symbols concrete
    /// and different.
    #[inline]
    fn mismatches(&self, row: usize, query: &TernaryWord) -> u32 {
        ((self.value[row] ^ query.value()) & self.care[row] & query.care()).count_ones()
    }

    /// Exact-match sensing: bitmask of valid rows with zero mismatches.
    pub fn search_exact(&self, query: &TernaryWord) -> u64 {
        let mut hits = 0u64;
        let mut rows = self.valid;
        while rows != 0 {
            let r = rows.trailing_zeros() as usize;
            rows &= rows - 1;
            if self.mismatches(r, query) == 0 {
                hits |= 1 << r;
            }
        }
        hits
    }

    /// Best-match sensing: `(row, mismatches)` of the valid row with the
    /// fewest mismatches, lowest row on ties.
    pub fn search_best(&self, query: &TernaryWord) -> Option<(usize, u32)> {
        let mut best: Option<(usize, u32)> = None;
        let mut rows = self.valid;
        while rows != 0 {
            let r = rows.trailing_zeros() as usize;
            rows &= rows - 1;
            let d = self.mismatches(r, query);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((r, d));
            }
        }
        best
    }
}

/// Bank of TCAM arrays mirroring the priority store. Slot `s` lives in
/// array `s / 64`, row `s % 64`.
#[derive(Debug, Clone)]
pub struct TcamBank {
    arrays: Vec<TcamArray>,
    capacity: usize,
    data_bits: u32,
}

impl TcamBank {
    pub fn new(capacity: usize, data_bits: u32) -> Result<Self> {
        if data_bits == 0 || data_bits > COLUMNS {
            return Err(Error::Argument(format!(
                "data width {data_bits} not in 1..=64"
            )));
        }
        Ok(Self {
            arrays: vec![TcamArray::default(); capacity.div_ceil(ROWS)],
            capacity,
            data_bits,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn data_bits(&self) -> u32 {
        self.data_bits
    }

    pub fn array_count(&self) -> usize {
        self.arrays.len()
    }

    fn locate(&self, slot: usize) -> Result<(usize, usize)> {
        if slot >= self.capacity {
            return Err(Error::Index {
                index: slot,
                limit: self.capacity,
            });
        }
        Ok((slot / ROWS, slot % ROWS))
    }

    /// Single-step row write through the write port.
    pub fn write(&mut self, slot: usize, raw: u64) -> Result<()> {
        let (a, r) = self.locate(slot)?;
        let care = width_mask(self.data_bits);
        self.arrays[a].write(r, raw, care);
        Ok(())
    }

    /// Stored data bits of a valid slot.
    pub fn read(&self, slot: usize) -> Option<u64> {
        let (a, r) = self.locate(slot).ok()?;
        self.arrays[a].is_valid(r).then(|| self.arrays[a].row(r).0)
    }

    pub fn is_valid(&self, slot: usize) -> bool {
        self.locate(slot)
            .map_or(false, |(a, r)| self.arrays[a].is_valid(r))
    }

    pub fn set_valid(&mut self, slot: usize, valid: bool) -> Result<()> {
        let (a, r) = self.locate(slot)?;
        self.arrays[a].set_valid(r, valid);
        Ok(())
    }

    pub fn valid_count(&self) -> usize {
        self.arrays
            .iter()
            .map(|a| a.valid.count_ones() as usize)
            .sum()
    }

    fn check_width(&self, query: &TernaryWord) -> Result<()> {
        if query.width() != self.data_bits {
            return Err(Error::Argument(format!(
                "query width {} does not match data width {}",
                query.width(),
                self.data_bits
            )));
        }
        Ok(())
    }

    /// Exact-match search of every array; matching slots in ascending order.
    pub fn search_exact(&self, query: &TernaryWord) -> Result<Vec<usize>> {
        self.check_width(query)?;
        let mut out = Vec::new();
        for (a, array) in self.arrays.iter().enumerate() {
            let mut hits = array.search_exact(query);
            while hits != 0 {
                let r = hits.trailing_zeros() as usize;
                hits &= hits - 1;
                out.push(a * ROWS + r);
            }
        }
        Ok(out)
    }

    /// Best-match search: `(slot, hamming distance)`, lowest slot on ties.
    pub fn search_best(&self, query: &TernaryWord) -> Result<(usize, u32)> {
        self.check_width(query)?;
        let mut best: Option<(usize, u32)> = None;
        for (a, array) in self.arrays.iter().enumerate() {
            if let Some((r, d)) = array.search_best(query) {
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((a * ROWS + r, d));
                }
            }
        }
        best.ok_or_else(|| Error::State("no valid rows in bank".into()))
    }
}
