//! Value-space reference implementation of associative-memory-friendly
//! prioritized sampling.
//!
//! Priorities in `[0, v_max]` are split into `m` equal-width groups. Each
//! group draws a random representative `V(g_i)` from its range and
//! contributes the stored priorities near `V(g_i)` to a candidate set
//! (CSP). A batch is then drawn uniformly, with replacement, from the CSP.
//! Larger representatives pull in more candidates, so larger priorities end
//! up over-represented the way priority sampling requires.
//!
//! Two neighbourhood rules are provided:
//! * [`Variant::Knn`]: the `N_i = round(lambda * V(g_i) * C(g_i))` values
//!   closest to `V(g_i)`, where `C(g_i)` is the group population.
//! * [`Variant::Frnn`]: every value within `round(lambda' / m * V(g_i))` raw
//!   units of `V(g_i)`; no per-group counts are needed.

mod search;

pub use search::{frnn_search, knn_search};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed::PriorityValue;
use crate::replay::PriorityStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Knn,
    Frnn,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Knn => "knn",
            Variant::Frnn => "frnn",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" | "k" | "amper-k" => Ok(Variant::Knn),
            "frnn" | "fr" | "amper-fr" => Ok(Variant::Frnn),
            other => Err(Error::Argument(format!(
                "unknown variant {other:?} (knn|frnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmperConfig {
    /// Group count `m`.
    pub groups: usize,
    /// kNN scaling factor.
    pub lambda: f64,
    /// frNN scaling factor.
    pub lambda_prime: f64,
    pub v_max: f64,
    pub batch_size: usize,
    pub variant: Variant,
}

impl Default for AmperConfig {
    fn default() -> Self {
        Self {
            groups: 20,
            lambda: 0.3,
            lambda_prime: 0.15,
            v_max: 1.0,
            batch_size: 64,
            variant: Variant::Frnn,
        }
    }
}

impl AmperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::Argument("group count must be >= 1".into()));
        }
        if !(self.lambda > 0.0) || !(self.lambda_prime > 0.0) {
            return Err(Error::Argument("scaling factors must be > 0".into()));
        }
        if !(self.v_max > 0.0) || !self.v_max.is_finite() {
            return Err(Error::Argument(format!(
                "v_max must be positive, got {}",
                self.v_max
            )));
        }
        Ok(())
    }

    /// `[v_max * i / m, v_max * (i + 1) / m)`.
    pub fn group_range(&self, i: usize) -> (f64, f64) {
        let m = self.groups as f64;
        (self.v_max * i as f64 / m, self.v_max * (i + 1) as f64 / m)
    }

    /// Group holding `value`. The last group is closed so `v_max` itself
    /// (and anything saturated above it) lands there.
    pub fn group_of(&self, value: f64) -> usize {
        let g = (value * self.groups as f64 / self.v_max).floor();
        if g <= 0.0 {
            0
        } else {
            (g as usize).min(self.groups - 1)
        }
    }
}

/// Per-group bookkeeping from one CSP construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    /// `V(g_i)` as drawn.
    pub representative: f64,
    /// `V(g_i)` as encoded for the search.
    pub query: PriorityValue,
    /// `C(g_i)`, only computed by the kNN variant.
    pub count: Option<usize>,
    pub subset_size: Option<usize>,
    /// Search radius in raw units, frNN only.
    pub radius: Option<u32>,
    /// Entries this group added to the CSP.
    pub found: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CandidateEntry {
    pub slot: usize,
    pub value: PriorityValue,
}

/// Candidate set of priorities. Duplicates across groups are kept.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CandidateSet {
    pub entries: Vec<CandidateEntry>,
    pub groups: Vec<GroupStats>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleBatch {
    pub slots: Vec<usize>,
    pub values: Vec<f64>,
    /// Set when the CSP came out empty and the batch was drawn uniformly
    /// from the whole store instead.
    pub fallback: bool,
}

pub fn group_representative<R: Rng + ?Sized>(cfg: &AmperConfig, i: usize, rng: &mut R) -> f64 {
    let (lo, hi) = cfg.group_range(i);
    rng.gen_range(lo..hi)
}

/// `C(g_i)` for every group.
pub fn group_counts(store: &PriorityStore, cfg: &AmperConfig) -> Vec<usize> {
    let codec = store.codec();
    let mut counts = vec![0; cfg.groups];
    for &p in store.raw_values() {
        counts[cfg.group_of(codec.decode(p))] += 1;
    }
    counts
}

/// `round(lambda * V * C)` clamped to `[0, total]`.
pub fn subset_size(cfg: &AmperConfig, v: f64, count: usize, total: usize) -> usize {
    let n = (cfg.lambda * v * count as f64).round();
    if n <= 0.0 || n.is_nan() {
        0
    } else {
        (n as usize).min(total)
    }
}

/// `round(lambda' / m * V)` in raw units, never below one unit.
pub fn radius(cfg: &AmperConfig, v_raw: u32) -> u32 {
    let d = (cfg.lambda_prime / cfg.groups as f64 * v_raw as f64).round();
    if d >= u32::MAX as f64 {
        u32::MAX
    } else {
        (d as u32).max(1)
    }
}

pub fn build_csp<R: Rng + ?Sized>(
    store: &PriorityStore,
    cfg: &AmperConfig,
    rng: &mut R,
) -> Result<CandidateSet> {
    cfg.validate()?;
    if store.is_empty() {
        return Err(Error::State("priority store is empty".into()));
    }
    let codec = store.codec();
    let counts = (cfg.variant == Variant::Knn).then(|| group_counts(store, cfg));
    let mut csp = CandidateSet::default();
    for i in 0..cfg.groups {
        let (lo, hi) = cfg.group_range(i);
        let representative = group_representative(cfg, i, rng);
        let query = codec.encode_floor(representative)?;
        let mut stats = GroupStats {
            index: i,
            lo,
            hi,
            representative,
            query,
            count: None,
            subset_size: None,
            radius: None,
            found: 0,
        };
        let found = match cfg.variant {
            Variant::Knn => {
                let c = counts.as_ref().expect("computed for knn")[i];
                let n = subset_size(cfg, representative, c, store.len());
                stats.count = Some(c);
                stats.subset_size = Some(n);
                knn_search(store, query, n)
            }
            Variant::Frnn => {
                let delta = radius(cfg, query.0);
                stats.radius = Some(delta);
                frnn_search(store, query, delta)
            }
        };
        stats.found = found.len();
        csp.entries.extend(found);
        csp.groups.push(stats);
    }
    Ok(csp)
}

/// Draws `b` entries uniformly with replacement from `csp`, or uniformly from
/// the store when the CSP is empty.
pub fn sample_from_csp<R: Rng + ?Sized>(
    store: &PriorityStore,
    csp: &CandidateSet,
    b: usize,
    rng: &mut R,
) -> SampleBatch {
    let codec = store.codec();
    let mut batch = SampleBatch {
        fallback: csp.is_empty(),
        ..Default::default()
    };
    for _ in 0..b {
        let (slot, value) = if csp.is_empty() {
            let slot = rng.gen_range(0..store.len());
            (slot, store.get(slot).expect("occupied"))
        } else {
            let e = csp.entries[rng.gen_range(0..csp.len())];
            (e.slot, e.value)
        };
        batch.slots.push(slot);
        batch.values.push(codec.decode(value));
    }
    batch
}

/// Builds a fresh CSP and draws `cfg.batch_size` samples from it.
pub fn amper_sample<R: Rng + ?Sized>(
    store: &PriorityStore,
    cfg: &AmperConfig,
    rng: &mut R,
) -> Result<SampleBatch> {
    let csp = build_csp(store, cfg, rng)?;
    Ok(sample_from_csp(store, &csp, cfg.batch_size, rng))
}

/// Scaling factor expected to give `|CSP| ~= ratio * len(store)`.
///
/// Uses group midpoints as representatives. For kNN the expected size is
/// `lambda * sum_i mid_i * C_i`; for frNN each group covers a window of
/// `2 * lambda' / m * mid_i` at density `C_i / (v_max / m)`.
pub fn scaling_for_ratio(store: &PriorityStore, cfg: &AmperConfig, ratio: f64) -> Result<f64> {
    cfg.validate()?;
    if !(ratio > 0.0) {
        return Err(Error::Argument(format!(
            "CSP ratio must be > 0, got {ratio}"
        )));
    }
    let counts = group_counts(store, cfg);
    let weighted: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let (lo, hi) = cfg.group_range(i);
            0.5 * (lo + hi) * c as f64
        })
        .sum();
    if weighted <= 0.0 {
        return Err(Error::State("store is empty".into()));
    }
    let target = ratio * store.len() as f64;
    Ok(match cfg.variant {
        Variant::Knn => target / weighted,
        Variant::Frnn => target * cfg.v_max / (2.0 * weighted),
    })
}

/// Copy of `cfg` with the active scaling factor set for the target ratio.
pub fn calibrated(store: &PriorityStore, cfg: &AmperConfig, ratio: f64) -> Result<AmperConfig> {
    let s = scaling_for_ratio(store, cfg, ratio)?;
    let mut out = *cfg;
    match cfg.variant {
        Variant::Knn => out.lambda = s,
        Variant::Frnn => out.lambda_prime = s,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::Codec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, v_max: f64, variant: Variant) -> AmperConfig {
        AmperConfig {
            groups: m,
            v_max,
            variant,
            ..Default::default()
        }
    }

    #[test]
    fn representative_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c1 = cfg(1, 7.0, Variant::Frnn);
        let c5 = cfg(5, 10.0, Variant::Frnn);
        for _ in 0..1000 {
            let v = group_representative(&c1, 0, &mut rng);
            assert!((0.0..7.0).contains(&v));
            let v = group_representative(&c5, 2, &mut rng);
            assert!((4.0..6.0).contains(&v));
        }
    }

    #[test]
    fn representative_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c5 = cfg(5, 10.0, Variant::Frnn);
        let mean = (0..100_000)
            .map(|_| group_representative(&c5, 2, &mut rng))
            .sum::<f64>()
            / 1e5;
        assert!((mean - 5.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn subset_size_examples() {
        let mut c = cfg(4, 100.0, Variant::Knn);
        c.lambda = 0.05;
        assert_eq!(subset_size(&c, 10.0, 20, 1000), 10);
        assert_eq!(subset_size(&c, 10.0, 0, 1000), 0);
        c.lambda = 0.25;
        // 0.25 * 3.3 * 7 = 5.775
        assert_eq!(subset_size(&c, 3.3, 7, 1000), 6);
        assert_eq!(subset_size(&c, 3.3, 7, 4), 4);
    }

    #[test]
    fn radius_examples() {
        let mut c = cfg(10, 100.0, Variant::Frnn);
        c.lambda_prime = 2.0;
        assert_eq!(radius(&c, 40), 8);
        assert_eq!(radius(&c, 0), 1);
        let mut c = cfg(20, 100.0, Variant::Frnn);
        c.lambda_prime = 1.2;
        assert_eq!(radius(&c, 100), 6);
    }

    #[test]
    fn group_partition() {
        let c = cfg(5, 10.0, Variant::Knn);
        for i in 0..5 {
            let (lo, hi) = c.group_range(i);
            assert_eq!(lo, 2.0 * i as f64);
            assert_eq!(hi, 2.0 * (i + 1) as f64);
            assert_eq!(c.group_of(lo), i);
        }
        assert_eq!(c.group_of(10.0), 4);
        assert_eq!(c.group_of(1.999), 0);
    }

    #[test]
    fn empty_store_is_rejected() {
        let store = PriorityStore::new(4, 1.0, Codec::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            build_csp(&store, &AmperConfig::default(), &mut rng),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn invalid_config() {
        let store = PriorityStore::from_values(&[0.5], 1.0, Codec::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = AmperConfig {
            groups: 0,
            ..Default::default()
        };
        assert!(build_csp(&store, &bad, &mut rng).is_err());
    }

    #[test]
    fn variant_parse() {
        assert_eq!("kNN".parse::<Variant>().unwrap(), Variant::Knn);
        assert_eq!("amper-fr".parse::<Variant>().unwrap(), Variant::Frnn);
        assert!("tree".parse::<Variant>().is_err());
    }
}
