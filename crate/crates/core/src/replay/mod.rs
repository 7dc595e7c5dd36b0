//! Experience-replay priority memory: uniform and sum-tree prioritized
//! sampling.

mod snapshot;
mod store;
mod sum_tree;

pub use snapshot::{read_snapshot, write_snapshot};
pub use store::PriorityStore;
pub use sum_tree::SumTree;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::{Codec, PriorityValue};

/// Prioritization parameters. `alpha = 0` makes every shaped priority 1,
/// i.e. uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerConfig {
    pub alpha: f64,
    pub epsilon_priority: f64,
}

impl Default for PerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            epsilon_priority: 1e-2,
        }
    }
}

impl PerConfig {
    /// Priority to store for a TD error: `(|delta| + eps)^alpha`.
    pub fn shape(&self, td_error: f64) -> f64 {
        (td_error.abs() + self.epsilon_priority).powf(self.alpha)
    }
}

/// `P(i) = p_i^alpha / sum_k p_k^alpha`.
pub fn per_probability(priorities: &[f64], alpha: f64, i: usize) -> Result<f64> {
    if priorities.is_empty() {
        return Err(Error::Domain("empty priority list".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if let Some(p) = priorities.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Domain(format!("nonpositive priority {p}")));
    }
    if i >= priorities.len() {
        return Err(Error::Index {
            index: i,
            limit: priorities.len(),
        });
    }
    let total: f64 = priorities.iter().map(|p| p.powf(alpha)).sum();
    Ok(priorities[i].powf(alpha) / total)
}

/// Draws `b` slots with probability proportional to their leaf weight.
pub fn per_sample_batch<R: Rng + ?Sized>(
    tree: &SumTree,
    b: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let total = tree.total();
    if total == 0 {
        return Err(Error::State("sum tree is empty".into()));
    }
    let s = total as f64;
    (0..b).map(|_| tree.sample(rng.gen_range(0.0..s))).collect()
}

/// Draws `b` occupied slots uniformly with replacement.
pub fn uniform_sample_batch<R: Rng + ?Sized>(
    store: &PriorityStore,
    b: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if store.is_empty() {
        return Err(Error::State("priority store is empty".into()));
    }
    let n = store.len();
    Ok((0..b).map(|_| rng.gen_range(0..n)).collect())
}

/// Writes new priorities into both the store and the tree.
pub fn priority_update_batch(
    store: &mut PriorityStore,
    tree: &mut SumTree,
    slots: &[usize],
    new_priorities: &[f64],
) -> Result<()> {
    if slots.len() != new_priorities.len() {
        return Err(Error::Argument(format!(
            "{} slots but {} priorities",
            slots.len(),
            new_priorities.len()
        )));
    }
    for (&slot, &p) in slots.iter().zip(new_priorities) {
        store.set(slot, p)?;
        tree.update(slot, store.get(slot).expect("slot checked by set"))?;
    }
    Ok(())
}

/// A [`PriorityStore`] paired with the [`SumTree`] that mirrors it.
///
/// Priorities handed to this type are already shaped (`p^alpha`).
#[derive(Debug, Clone)]
pub struct PriorityMemory {
    store: PriorityStore,
    tree: SumTree,
}

impl PriorityMemory {
    pub fn new(capacity: usize, v_max: f64, codec: Codec) -> Result<Self> {
        Ok(Self {
            store: PriorityStore::new(capacity, v_max, codec)?,
            tree: SumTree::new(capacity),
        })
    }

    pub fn from_store(store: PriorityStore) -> Self {
        let mut tree = SumTree::new(store.capacity());
        for (slot, &p) in store.raw_values().iter().enumerate() {
            tree.update(slot, p).expect("slot below capacity");
        }
        Self { store, tree }
    }

    pub fn store(&self) -> &PriorityStore {
        &self.store
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    /// Inserts with an explicit priority. Returns `(slot, replaced)`.
    pub fn insert(&mut self, p: f64) -> Result<(usize, Option<PriorityValue>)> {
        let (slot, old) = self.store.insert(p)?;
        self.tree
            .update(slot, self.store.get(slot).expect("just written"))?;
        Ok((slot, old))
    }

    /// Inserts with the current maximum stored priority (or `initial` when
    /// empty), so new experiences are sampled at least once with high odds.
    pub fn insert_max(&mut self, initial: f64) -> Result<(usize, Option<PriorityValue>)> {
        let p = self.store.max_value().unwrap_or(initial);
        self.insert(p)
    }

    pub fn update_batch(&mut self, slots: &[usize], new_priorities: &[f64]) -> Result<()> {
        priority_update_batch(&mut self.store, &mut self.tree, slots, new_priorities)
    }

    pub fn sample_per<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::State("priority memory is empty".into()));
        }
        per_sample_batch(&self.tree, b, rng)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<Vec<usize>> {
        uniform_sample_batch(&self.store, b, rng)
    }

    /// `true` when every occupied leaf equals its store slot and the tree
    /// sums are consistent.
    pub fn is_consistent(&self) -> bool {
        self.tree.is_consistent()
            && self
                .store
                .raw_values()
                .iter()
                .enumerate()
                .all(|(i, p)| self.tree.leaf(i) == Some(p.0 as u64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn int_memory(values: &[f64]) -> PriorityMemory {
        let store = PriorityStore::from_values(values, 1e6, Codec::new(0).unwrap()).unwrap();
        PriorityMemory::from_store(store)
    }

    #[test]
    fn per_probability_examples() {
        assert_eq!(per_probability(&[1.0, 3.0], 1.0, 1).unwrap(), 0.75);
        assert_eq!(per_probability(&[4.0, 1.0], 0.0, 0).unwrap(), 0.5);
        // sqrt(4) / (sqrt(4) + sqrt(1))
        assert!((per_probability(&[4.0, 1.0], 0.5, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(per_probability(&[], 1.0, 0).is_err());
        assert!(per_probability(&[1.0, 0.0], 1.0, 0).is_err());
        assert!(per_probability(&[1.0, -2.0], 1.0, 0).is_err());
    }

    #[test]
    fn per_probability_sums_to_one() {
        let p: Vec<f64> = (1..200).map(|k| (k as f64).sqrt() * 0.37).collect();
        for alpha in [0.0, 0.6, 1.0, 2.5] {
            let s: f64 = (0..p.len())
                .map(|i| per_probability(&p, alpha, i).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = int_memory(&[9.0]);
        assert!(one
            .sample_per(32, &mut rng)
            .unwrap()
            .iter()
            .all(|&s| s == 0));
        assert!(one
            .sample_uniform(32, &mut rng)
            .unwrap()
            .iter()
            .all(|&s| s == 0));
        assert!(one.sample_per(0, &mut rng).unwrap().is_empty());

        let empty = PriorityMemory::new(4, 10.0, Codec::default()).unwrap();
        assert!(matches!(
            empty.sample_per(1, &mut rng),
            Err(Error::State(_))
        ));
        assert!(matches!(
            empty.sample_uniform(1, &mut rng),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn update_batch_cases() {
        let mut m = int_memory(&[3.0, 2.0, 5.0, 1.0]);
        let before = m.tree().clone();
        m.update_batch(&[2], &[5.0]).unwrap();
        assert_eq!(m.tree(), &before);

        m.update_batch(&[0, 1, 2, 3], &[1.0; 4]).unwrap();
        assert_eq!(m.tree().total(), 4);
        assert!(m.is_consistent());

        assert!(matches!(
            m.update_batch(&[0, 1], &[1.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn update_fuzz_against_running_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut m = int_memory(&[1.0; 37]);
        let mut shadow = vec![1u64; 37];
        for _ in 0..1000 {
            let slot = rng.gen_range(0..37);
            let p = rng.gen_range(1..10_000u32);
            m.update_batch(&[slot], &[p as f64]).unwrap();
            shadow[slot] = p as u64;
            assert_eq!(m.tree().total(), shadow.iter().sum::<u64>());
        }
        assert!(m.is_consistent());
    }

    #[test]
    fn insert_max_uses_current_maximum() {
        let mut m = PriorityMemory::new(8, 100.0, Codec::default()).unwrap();
        m.insert_max(1.0).unwrap();
        assert_eq!(m.store().value(0), Some(1.0));
        m.update_batch(&[0], &[7.5]).unwrap();
        m.insert_max(1.0).unwrap();
        assert_eq!(m.store().value(1), Some(7.5));
    }

    #[test]
    fn shaping_with_alpha_zero_is_flat() {
        let cfg = PerConfig {
            alpha: 0.0,
            epsilon_priority: 1e-2,
        };
        assert_eq!(cfg.shape(0.0), 1.0);
        assert_eq!(cfg.shape(-42.0), 1.0);
        let cfg = PerConfig {
            alpha: 1.0,
            epsilon_priority: 0.5,
        };
        assert_eq!(cfg.shape(-1.5), 2.0);
    }
}
