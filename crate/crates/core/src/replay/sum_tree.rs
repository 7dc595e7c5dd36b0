use crate::error::{Error, Result};
use crate::fixed::PriorityValue;

/// Binary sum tree over raw fixed-point priorities.
///
/// Stored as an implicit heap: `nodes[1]` is the root, leaves occupy
/// `nodes[leaf_count..2 * leaf_count]`. Sums are exact `u64` arithmetic, so
/// every internal node is always bit-exactly the sum of its children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumTree {
    leaf_count: usize,
    nodes: Vec<u64>,
}

impl SumTree {
    /// Tree with room for `capacity` slots, rounded up to a power of two.
    /// Unused leaves hold zero.
    pub fn new(capacity: usize) -> Self {
        let leaf_count = capacity.max(1).next_power_of_two();
        Self {
            leaf_count,
            nodes: vec![0; 2 * leaf_count],
        }
    }

    pub fn from_leaves(leaves: &[PriorityValue]) -> Self {
        let mut tree = Self::new(leaves.len());
        for (i, p) in leaves.iter().enumerate() {
            tree.nodes[tree.leaf_count + i] = p.0 as u64;
        }
        for n in (1..tree.leaf_count).rev() {
            tree.nodes[n] = tree.nodes[2 * n] + tree.nodes[2 * n + 1];
        }
        tree
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Root sum `S`, in raw units.
    pub fn total(&self) -> u64 {
        self.nodes[1]
    }

    pub fn leaf(&self, slot: usize) -> Option<u64> {
        (slot < self.leaf_count).then(|| self.nodes[self.leaf_count + slot])
    }

    pub fn leaves(&self) -> &[u64] {
        &self.nodes[self.leaf_count..]
    }

    /// Replaces one leaf and recomputes its ancestors.
    pub fn update(&mut self, slot: usize, p: PriorityValue) -> Result<()> {
        if slot >= self.leaf_count {
            return Err(Error::Index {
                index: slot,
                limit: self.leaf_count,
            });
        }
        let mut n = self.leaf_count + slot;
        self.nodes[n] = p.0 as u64;
        while n > 1 {
            n /= 2;
            self.nodes[n] = self.nodes[2 * n] + self.nodes[2 * n + 1];
        }
        Ok(())
    }

    /// Returns the slot whose cumulative region `[c_{i-1}, c_i)` contains
    /// `y`. Requires `0 <= y < S`.
    pub fn sample(&self, y: f64) -> Result<usize> {
        let total = self.total();
        if !(y >= 0.0 && y < total as f64) {
            return Err(Error::Domain(format!("y = {y} outside [0, {total})")));
        }
        let mut y = y;
        let mut n = 1;
        while n < self.leaf_count {
            let left = self.nodes[2 * n] as f64;
            if y < left {
                n *= 2;
            } else {
                // exact: y and left are both multiples of ulp(y) below 2^53
                y -= left;
                n = 2 * n + 1;
            }
        }
        debug_assert!(self.nodes[n] > 0);
        Ok(n - self.leaf_count)
    }

    /// Full scan of the sum invariant.
    pub fn is_consistent(&self) -> bool {
        (1..self.leaf_count).all(|n| self.nodes[n] == self.nodes[2 * n] + self.nodes[2 * n + 1])
    }
}
