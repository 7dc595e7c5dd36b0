use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::fixed::{Codec, PriorityValue};

/// Priority side of the experience-replay memory.
///
/// Slots are filled in order and, once full, overwritten oldest-first.
/// Every stored value satisfies `0 < p <= v_max`; inputs above `v_max`
/// saturate. A value-ordered index of `(raw, slot)` pairs is kept alongside
/// the slots so nearest-neighbour queries do not need a scan.
#[derive(Debug, Clone)]
pub struct PriorityStore {
    codec: Codec,
    v_max: f64,
    capacity: usize,
    slots: Vec<PriorityValue>,
    cursor: usize,
    index: BTreeSet<(u32, u32)>,
}

impl PriorityStore {
    pub fn new(capacity: usize, v_max: f64, codec: Codec) -> Result<Self> {
        if capacity == 0 || capacity > u32::MAX as usize {
            return Err(Error::Argument(format!("capacity {capacity} unsupported")));
        }
        if !(v_max > 0.0) || codec.encode(v_max).is_err() {
            return Err(Error::Argument(format!("v_max {v_max} not representable")));
        }
        Ok(Self {
            codec,
            v_max,
            capacity,
            slots: Vec::with_capacity(capacity),
            cursor: 0,
            index: BTreeSet::new(),
        })
    }

    /// Store prefilled with `values` in slot order.
    pub fn from_values(values: &[f64], v_max: f64, codec: Codec) -> Result<Self> {
        let mut store = Self::new(values.len().max(1), v_max, codec)?;
        for &v in values {
            store.insert(v)?;
        }
        Ok(store)
    }

    pub fn codec(&self) -> Codec {
        self.codec
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() == self.capacity
    }

    /// Slot the next insertion will write.
    pub fn write_cursor(&self) -> usize {
        self.cursor
    }

    pub fn get(&self, slot: usize) -> Option<PriorityValue> {
        self.slots.get(slot).copied()
    }

    pub fn value(&self, slot: usize) -> Option<f64> {
        self.get(slot).map(|p| self.codec.decode(p))
    }

    /// Occupied slots in slot order.
    pub fn raw_values(&self) -> &[PriorityValue] {
        &self.slots
    }

    pub fn values(&self) -> Vec<f64> {
        self.slots.iter().map(|&p| self.codec.decode(p)).collect()
    }

    /// `(raw, slot)` pairs ordered by value, then slot.
    pub fn sorted_index(&self) -> &BTreeSet<(u32, u32)> {
        &self.index
    }

    pub fn max_value(&self) -> Option<f64> {
        self.index
            .last()
            .map(|&(raw, _)| self.codec.decode(PriorityValue(raw)))
    }

    /// Encodes a real priority for storage: rejects `p <= 0`, saturates at
    /// `v_max` and never yields a zero raw word.
    pub fn encode(&self, p: f64) -> Result<PriorityValue> {
        if !(p > 0.0) || p.is_nan() {
            return Err(Error::Domain(format!("priority must be positive, got {p}")));
        }
        let raw = self.codec.encode(p.min(self.v_max))?;
        Ok(PriorityValue(raw.0.max(1)))
    }

    /// Writes `p` at the write cursor. Returns the slot written and the
    /// value it replaced, if any.
    pub fn insert(&mut self, p: f64) -> Result<(usize, Option<PriorityValue>)> {
        let raw = self.encode(p)?;
        Ok(self.insert_raw(raw))
    }

    pub fn insert_raw(&mut self, raw: PriorityValue) -> (usize, Option<PriorityValue>) {
        let raw = PriorityValue(raw.0.max(1));
        let slot = self.cursor;
        let old = if slot < self.slots.len() {
            Some(self.replace(slot, raw))
        } else {
            self.slots.push(raw);
            self.index.insert((raw.0, slot as u32));
            None
        };
        self.cursor = (self.cursor + 1) % self.capacity;
        (slot, old)
    }

    /// Overwrites an occupied slot, returning the previous value.
    pub fn set(&mut self, slot: usize, p: f64) -> Result<PriorityValue> {
        let raw = self.encode(p)?;
        self.set_raw(slot, raw)
    }

    pub fn set_raw(&mut self, slot: usize, raw: PriorityValue) -> Result<PriorityValue> {
        if slot >= self.slots.len() {
            return Err(Error::Index {
                index: slot,
                limit: self.slots.len(),
            });
        }
        Ok(self.replace(slot, PriorityValue(raw.0.max(1))))
    }

    fn replace(&mut self, slot: usize, raw: PriorityValue) -> PriorityValue {
        let old = std::mem::replace(&mut self.slots[slot], raw);
        if old != raw {
            self.index.remove(&(old.0, slot as u32));
            self.index.insert((raw.0, slot as u32));
        }
        old
    }

    pub(crate) fn restore(
        capacity: usize,
        v_max: f64,
        codec: Codec,
        occupied: Vec<PriorityValue>,
    ) -> Result<Self> {
        let mut store = Self::new(capacity, v_max, codec)?;
        for raw in occupied {
            store.insert_raw(raw);
        }
        Ok(store)
    }
}
