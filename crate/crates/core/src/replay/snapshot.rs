//! Binary snapshot of a priority store: little-endian 32-bit words
//! `capacity, frac_bits, leaf[0..capacity]`, with unoccupied slots as 0.

use crate::error::{Error, Result};
use crate::fixed::{Codec, PriorityValue};
use crate::replay::PriorityStore;

pub fn write_snapshot(store: &PriorityStore) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * (2 + store.capacity()));
    out.extend_from_slice(&(store.capacity() as u32).to_le_bytes());
    out.extend_from_slice(&store.codec().frac_bits().to_le_bytes());
    for slot in 0..store.capacity() {
        let raw = store.get(slot).map_or(0, |p| p.0);
        out.extend_from_slice(&raw.to_le_bytes());
    }
    out
}

/// Rebuilds a store from a snapshot. Occupancy is the leading run of
/// nonzero words; the write cursor resumes after it.
pub fn read_snapshot(bytes: &[u8], v_max: f64) -> Result<PriorityStore> {
    if bytes.len() % 4 != 0 || bytes.len() < 8 {
        return Err(Error::Snapshot(format!("bad length {}", bytes.len())));
    }
    let words: Vec<u32> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let capacity = words[0] as usize;
    let codec = Codec::new(words[1])?;
    let leaves = &words[2..];
    if leaves.len() != capacity {
        return Err(Error::Snapshot(format!(
            "header says {capacity} slots, found {}",
            leaves.len()
        )));
    }
    let occupied = leaves.iter().take_while(|&&w| w != 0).count();
    if leaves[occupied..].iter().any(|&w| w != 0) {
        return Err(Error::Snapshot("occupied slots are not a prefix".into()));
    }
    PriorityStore::restore(
        capacity,
        v_max,
        codec,
        leaves[..occupied]
            .iter()
            .map(|&w| PriorityValue(w))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian_words() {
        let store = PriorityStore::from_values(&[3.0, 2.0], 100.0, Codec::new(0).unwrap()).unwrap();
        let bytes = write_snapshot(&store);
        assert_eq!(bytes, vec![2, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0]);
    }

    #[test]
    fn partial_store_round_trips() {
        let mut store = PriorityStore::new(5, 8.0, Codec::default()).unwrap();
        for v in [0.25, 7.5, 1.0] {
            store.insert(v).unwrap();
        }
        let back = read_snapshot(&write_snapshot(&store), 8.0).unwrap();
        assert_eq!(back.raw_values(), store.raw_values());
        assert_eq!(back.write_cursor(), 3);
        assert_eq!(back.codec(), store.codec());
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_snapshot(&[1, 2, 3], 1.0).is_err());
        assert!(read_snapshot(&[3, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0], 1.0).is_err());
        // hole in occupancy
        let bytes = [2u32, 0, 0, 5]
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .collect::<Vec<_>>();
        assert!(read_snapshot(&bytes, 10.0).is_err());
    }
}
