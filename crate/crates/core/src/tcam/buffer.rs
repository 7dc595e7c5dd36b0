/// Default candidate set buffer size: 8000 entries of 32 bits.
pub const CSB_CAPACITY: usize = 8000;

/// Staging buffer between TCAM search and the final uniform readout.
/// Holds slot indices. Writes past capacity are dropped and counted.
#[derive(Debug, Clone)]
pub struct CandidateSetBuffer {
    capacity: usize,
    entries: Vec<u32>,
    dropped: u64,
}

impl Default for CandidateSetBuffer {
    fn default() -> Self {
        Self::new(CSB_CAPACITY)
    }
}

impl CandidateSetBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            dropped: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries lost to overflow since construction.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Returns `false` when the buffer is full and the entry was dropped.
    pub fn push(&mut self, slot: u32) -> bool {
        if self.entries.len() < self.capacity {
            self.entries.push(slot);
            true
        } else {
            self.dropped += 1;
            false
        }
    }

    pub fn read(&self, i: usize) -> Option<u32> {
        self.entries.get(i).copied()
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
