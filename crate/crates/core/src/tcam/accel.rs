//! Hardware sampling flows: URNG -> query generator -> parallel TCAM search
//! -> candidate set buffer -> URNG-indexed readout.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::amper::{knn_search, radius, subset_size, AmperConfig, SampleBatch, Variant};
use crate::error::{Error, Result};
use crate::fixed::{Codec, PriorityValue};
use crate::replay::PriorityStore;
use crate::tcam::array::TcamBank;
use crate::tcam::buffer::CandidateSetBuffer;
use crate::tcam::lfsr::Urng;
use crate::tcam::query::{frnn_query, prefix_mask};
use crate::tcam::word::TernaryWord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Urng,
    Qgen,
    Search,
    CsbWrite,
    CsbRead,
}

/// One hardware step. `group` is `None` for the readout phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub group: Option<usize>,
    pub arrays: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    fn push(&mut self, kind: StepKind, group: Option<usize>, arrays: usize) {
        self.steps.push(TraceStep {
            kind,
            group,
            arrays,
        });
    }

    pub fn count(&self, kind: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind == kind).count()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Self> {
        let mut steps = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            steps.push(serde_json::from_str(&line)?);
        }
        Ok(Self { steps })
    }
}

fn record(trace: &mut Option<&mut Trace>, kind: StepKind, group: Option<usize>, arrays: usize) {
    if let Some(t) = trace.as_deref_mut() {
        t.push(kind, group, arrays);
    }
}

/// What one group contributed during a hardware sampling call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HwGroup {
    pub group: usize,
    pub representative: f64,
    pub query: u32,
    pub delta: Option<u32>,
    pub mask: Option<u32>,
    pub count: Option<usize>,
    pub subset_size: Option<usize>,
    /// Slots written to the CSB, in arrival order.
    pub matches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HwSample {
    pub batch: SampleBatch,
    pub groups: Vec<HwGroup>,
    pub csp_size: usize,
    /// CSB entries dropped to overflow during this call.
    pub dropped: u64,
}

/// Per-group population counters, maintained on every write.
#[derive(Debug, Clone)]
pub struct GroupCounter {
    cfg: AmperConfig,
    codec: Codec,
    counts: Vec<usize>,
}

impl GroupCounter {
    pub fn new(cfg: &AmperConfig, codec: Codec) -> Self {
        Self {
            cfg: *cfg,
            codec,
            counts: vec![0; cfg.groups],
        }
    }

    pub fn from_store(cfg: &AmperConfig, store: &PriorityStore) -> Self {
        let mut c = Self::new(cfg, store.codec());
        for &p in store.raw_values() {
            c.record_write(None, p.0);
        }
        c
    }

    fn group_of(&self, raw: u32) -> usize {
        self.cfg.group_of(self.codec.decode(PriorityValue(raw)))
    }

    pub fn record_write(&mut self, old: Option<u32>, new: u32) {
        if let Some(old) = old {
            let g = self.group_of(old);
            self.counts[g] -= 1;
        }
        let g = self.group_of(new);
        self.counts[g] += 1;
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn compatible(&self, cfg: &AmperConfig) -> bool {
        self.cfg.groups == cfg.groups && self.cfg.v_max == cfg.v_max
    }
}

fn valid_slots(bank: &TcamBank) -> Vec<usize> {
    (0..bank.capacity()).filter(|&s| bank.is_valid(s)).collect()
}

fn readout(
    bank: &TcamBank,
    codec: Codec,
    urng: &mut Urng,
    csb: &CandidateSetBuffer,
    b: usize,
    trace: &mut Option<&mut Trace>,
) -> Result<SampleBatch> {
    let arrays = bank.array_count();
    let mut batch = SampleBatch {
        fallback: csb.is_empty(),
        ..Default::default()
    };
    let pool = if csb.is_empty() {
        valid_slots(bank)
    } else {
        Vec::new()
    };
    if csb.is_empty() && pool.is_empty() {
        return Err(Error::State("bank holds no valid rows".into()));
    }
    for _ in 0..b {
        record(trace, StepKind::Urng, None, 0);
        let slot = if csb.is_empty() {
            pool[urng.below(pool.len())]
        } else {
            csb.read(urng.below(csb.len())).expect("index below len") as usize
        };
        record(trace, StepKind::CsbRead, None, arrays);
        batch.slots.push(slot);
        let raw = bank.read(slot).expect("sampled slot is valid");
        batch.values.push(codec.decode(PriorityValue(raw as u32)));
    }
    Ok(batch)
}

/// Fixed-radius flow. Per group: draw `V(g_i)`, compute the radius and
/// prefix mask, run one exact-match search over all arrays and stream the
/// hits into the CSB. Then draw `cfg.batch_size` CSB entries.
pub fn hw_amper_fr_sample(
    bank: &TcamBank,
    cfg: &AmperConfig,
    codec: Codec,
    urng: &mut Urng,
    csb: &mut CandidateSetBuffer,
    mut trace: Option<&mut Trace>,
) -> Result<HwSample> {
    cfg.validate()?;
    if bank.data_bits() != 32 {
        return Err(Error::Argument(
            "prefix queries need a 32-bit data width".into(),
        ));
    }
    let arrays = bank.array_count();
    let dropped_before = csb.dropped();
    csb.clear();
    let mut groups = Vec::with_capacity(cfg.groups);
    for i in 0..cfg.groups {
        let (lo, hi) = cfg.group_range(i);
        let representative = urng.real_range(lo, hi)?;
        record(&mut trace, StepKind::Urng, Some(i), 0);
        let v_raw = codec.encode_floor(representative)?.0;
        let delta = radius(cfg, v_raw);
        let mask = prefix_mask(delta)?;
        let query = frnn_query(v_raw, mask);
        record(&mut trace, StepKind::Qgen, Some(i), 0);
        let hits = bank.search_exact(&query)?;
        record(&mut trace, StepKind::Search, Some(i), arrays);
        let mut matches = Vec::with_capacity(hits.len());
        for slot in hits {
            if csb.push(slot as u32) {
                record(&mut trace, StepKind::CsbWrite, Some(i), 0);
                matches.push(slot);
            }
        }
        groups.push(HwGroup {
            group: i,
            representative,
            query: v_raw,
            delta: Some(delta),
            mask: Some(mask),
            count: None,
            subset_size: None,
            matches,
        });
    }
    let batch = readout(bank, codec, urng, csb, cfg.batch_size, &mut trace)?;
    Ok(HwSample {
        batch,
        groups,
        csp_size: csb.len(),
        dropped: csb.dropped() - dropped_before,
    })
}

/// k-nearest flow. Per group: draw `V(g_i)`, compute `N_i` from the group
/// counter, then issue `N_i` best-match searches, clearing each winner's
/// valid bit so it cannot win again during this call. Valid bits are
/// restored before returning.
pub fn hw_amper_k_sample(
    bank: &mut TcamBank,
    cfg: &AmperConfig,
    codec: Codec,
    urng: &mut Urng,
    csb: &mut CandidateSetBuffer,
    counter: &GroupCounter,
    mut trace: Option<&mut Trace>,
) -> Result<HwSample> {
    cfg.validate()?;
    if !counter.compatible(cfg) {
        return Err(Error::Argument(
            "group counter was built for a different grouping".into(),
        ));
    }
    let arrays = bank.array_count();
    let dropped_before = csb.dropped();
    let total = bank.valid_count();
    csb.clear();
    let mut cleared = Vec::new();
    let mut groups = Vec::with_capacity(cfg.groups);
    let mut result = Ok(());
    for i in 0..cfg.groups {
        let (lo, hi) = cfg.group_range(i);
        let representative = urng.real_range(lo, hi)?;
        record(&mut trace, StepKind::Urng, Some(i), 0);
        let v_raw = codec.encode_floor(representative)?.0;
        let count = counter.counts()[i];
        let n = subset_size(cfg, codec.decode(PriorityValue(v_raw)), count, total);
        record(&mut trace, StepKind::Qgen, Some(i), 0);
        let query = TernaryWord::binary(bank.data_bits(), v_raw as u64)?;
        let mut matches = Vec::with_capacity(n);
        for _ in 0..n {
            let (slot, _) = match bank.search_best(&query) {
                Ok(hit) => hit,
                Err(_) => break,
            };
            record(&mut trace, StepKind::Search, Some(i), arrays);
            if let Err(e) = bank.set_valid(slot, false) {
                result = Err(e);
                break;
            }
            cleared.push(slot);
            if csb.push(slot as u32) {
                record(&mut trace, StepKind::CsbWrite, Some(i), 0);
                matches.push(slot);
            }
        }
        groups.push(HwGroup {
            group: i,
            representative,
            query: v_raw,
            delta: None,
            mask: None,
            count: Some(count),
            subset_size: Some(n),
            matches,
        });
    }
    for &slot in &cleared {
        bank.set_valid(slot, true)?;
    }
    result?;
    let batch = readout(bank, codec, urng, csb, cfg.batch_size, &mut trace)?;
    Ok(HwSample {
        batch,
        groups,
        csp_size: csb.len(),
        dropped: csb.dropped() - dropped_before,
    })
}

/// Fraction of hardware kNN winners that the value-space search would not
/// have chosen for the same query and subset size. Hamming distance on the
/// encoding and value distance disagree in general; this is a measurement,
/// not a correctness check.
pub fn knn_disagreement(store: &PriorityStore, hw: &HwSample) -> f64 {
    let mut total = 0usize;
    let mut differ = 0usize;
    for g in &hw.groups {
        if g.matches.is_empty() {
            continue;
        }
        let reference: HashSet<usize> = knn_search(store, PriorityValue(g.query), g.matches.len())
            .into_iter()
            .map(|e| e.slot)
            .collect();
        total += g.matches.len();
        differ += g.matches.iter().filter(|s| !reference.contains(s)).count();
    }
    if total == 0 {
        0.0
    } else {
        differ as f64 / total as f64
    }
}

/// Accelerator state: the TCAM bank mirroring the store, group counters,
/// URNG and CSB.
#[derive(Debug, Clone)]
pub struct Accelerator {
    bank: TcamBank,
    codec: Codec,
    counter: GroupCounter,
    urng: Urng,
    csb: CandidateSetBuffer,
    trace: Option<Trace>,
}

impl Accelerator {
    pub fn new(capacity: usize, codec: Codec, cfg: &AmperConfig, seed: u32) -> Result<Self> {
        Ok(Self {
            bank: TcamBank::new(capacity, 32)?,
            codec,
            counter: GroupCounter::new(cfg, codec),
            urng: Urng::new(seed)?,
            csb: CandidateSetBuffer::default(),
            trace: None,
        })
    }

    /// Accelerator preloaded with the contents of `store`.
    pub fn from_store(store: &PriorityStore, cfg: &AmperConfig, seed: u32) -> Result<Self> {
        let mut acc = Self::new(store.capacity(), store.codec(), cfg, seed)?;
        for (slot, &p) in store.raw_values().iter().enumerate() {
            acc.write(slot, p)?;
        }
        Ok(acc)
    }

    pub fn with_csb_capacity(mut self, capacity: usize) -> Self {
        self.csb = CandidateSetBuffer::new(capacity);
        self
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Trace::default);
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.as_mut().map(std::mem::take)
    }

    pub fn bank(&self) -> &TcamBank {
        &self.bank
    }

    pub fn counter(&self) -> &GroupCounter {
        &self.counter
    }

    pub fn csb(&self) -> &CandidateSetBuffer {
        &self.csb
    }

    /// Direct write through the TCAM write port; keeps group counts current.
    pub fn write(&mut self, slot: usize, p: PriorityValue) -> Result<()> {
        let old = self.bank.read(slot).map(|v| v as u32);
        self.bank.write(slot, p.0 as u64)?;
        self.counter.record_write(old, p.0);
        Ok(())
    }

    /// `true` when every occupied store slot is mirrored bit-exactly and no
    /// other row is valid.
    pub fn mirrors(&self, store: &PriorityStore) -> bool {
        self.bank.valid_count() == store.len()
            && store
                .raw_values()
                .iter()
                .enumerate()
                .all(|(s, p)| self.bank.read(s) == Some(p.0 as u64))
    }

    pub fn sample(&mut self, cfg: &AmperConfig) -> Result<HwSample> {
        match cfg.variant {
            Variant::Frnn => hw_amper_fr_sample(
                &self.bank,
                cfg,
                self.codec,
                &mut self.urng,
                &mut self.csb,
                self.trace.as_mut(),
            ),
            Variant::Knn => hw_amper_k_sample(
                &mut self.bank,
                cfg,
                self.codec,
                &mut self.urng,
                &mut self.csb,
                &self.counter,
                self.trace.as_mut(),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::{estimate_frnn, estimate_from_trace, estimate_knn, LatencyTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_store(n: usize, rng: &mut ChaCha8Rng) -> PriorityStore {
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.001..1.0)).collect();
        PriorityStore::from_values(&values, 1.0, Codec::default()).unwrap()
    }

    #[test]
    fn fr_csp_equals_ternary_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let store = random_store(rng.gen_range(1..300), &mut rng);
            let cfg = AmperConfig {
                groups: rng.gen_range(1..25),
                lambda_prime: rng.gen_range(0.01..2.0),
                ..AmperConfig::default()
            };
            let mut acc = Accelerator::from_store(&store, &cfg, case + 1).unwrap();
            let hw = acc.sample(&cfg).unwrap();
            let mut expect = Vec::new();
            for g in &hw.groups {
                let mask = g.mask.unwrap();
                for (slot, p) in store.raw_values().iter().enumerate() {
                    if p.0 & !mask == g.query & !mask {
                        expect.push(slot);
                    }
                }
            }
            assert_eq!(
                acc.csb()
                    .entries()
                    .iter()
                    .map(|&s| s as usize)
                    .collect::<Vec<_>>(),
                expect
            );
            assert_eq!(hw.csp_size, expect.len());
        }
    }

    #[test]
    fn knn_hardware_never_repeats_within_a_call() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let store = random_store(500, &mut rng);
        let cfg = AmperConfig {
            variant: Variant::Knn,
            lambda: 1.0,
            groups: 10,
            ..AmperConfig::default()
        };
        let mut acc = Accelerator::from_store(&store, &cfg, 3).unwrap();
        for _ in 0..20 {
            let hw = acc.sample(&cfg).unwrap();
            let mut seen: Vec<u32> = acc.csb().entries().to_vec();
            let n = seen.len();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), n);
            assert_eq!(
                n,
                hw.groups
                    .iter()
                    .map(|g| g.subset_size.unwrap())
                    .sum::<usize>()
                    .min(500)
            );
            assert!(acc.mirrors(&store));
            let rate = knn_disagreement(&store, &hw);
            assert!((0.0..=1.0).contains(&rate));
        }
    }

    #[test]
    fn knn_requires_matching_counter() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let store = random_store(50, &mut rng);
        let cfg = AmperConfig {
            variant: Variant::Knn,
            ..AmperConfig::default()
        };
        let mut acc = Accelerator::from_store(&store, &cfg, 3).unwrap();
        assert!(acc.sample(&AmperConfig { groups: 7, ..cfg }).is_err());
    }

    #[test]
    fn counter_tracks_writes() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let cfg = AmperConfig::default();
        let mut store = PriorityStore::new(100, 1.0, Codec::default()).unwrap();
        let mut acc = Accelerator::new(100, Codec::default(), &cfg, 9).unwrap();
        for _ in 0..10_000 {
            let p = rng.gen_range(0.0001..1.5);
            let slot = if store.is_full() && rng.gen_bool(0.5) {
                let s = rng.gen_range(0..100);
                store.set(s, p).unwrap();
                s
            } else {
                store.insert(p).unwrap().0
            };
            acc.write(slot, store.get(slot).unwrap()).unwrap();
        }
        assert!(acc.mirrors(&store));
        assert_eq!(
            acc.counter().counts(),
            GroupCounter::from_store(&cfg, &store).counts()
        );
        assert_eq!(acc.counter().total(), 100);
    }

    #[test]
    fn trace_costs_match_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let store = random_store(2000, &mut rng);
        let table = LatencyTable::default();
        for variant in [Variant::Frnn, Variant::Knn] {
            let cfg = AmperConfig {
                variant,
                groups: 20,
                batch_size: 64,
                ..AmperConfig::default()
            };
            let mut acc = Accelerator::from_store(&store, &cfg, 77).unwrap();
            acc.enable_trace();
            let hw = acc.sample(&cfg).unwrap();
            let trace = acc.take_trace().unwrap();
            let from_trace = estimate_from_trace(&table, variant, &trace);
            let formula = match variant {
                Variant::Frnn => estimate_frnn(&table, 20, hw.csp_size, 64),
                Variant::Knn => estimate_knn(&table, 20, hw.csp_size, 64),
            };
            assert!(
                (from_trace.total_ns - formula.total_ns).abs() < 1e-6,
                "{variant}"
            );
            assert_eq!(trace.count(StepKind::CsbRead), 64);

            let mut buf = Vec::new();
            trace.write_jsonl(&mut buf).unwrap();
            assert_eq!(Trace::read_jsonl(&buf[..]).unwrap(), trace);
        }
    }

    #[test]
    fn csb_overflow_truncates() {
        let store = PriorityStore::from_values(&vec![0.5; 200], 1.0, Codec::default()).unwrap();
        let cfg = AmperConfig {
            groups: 1,
            lambda_prime: 1.0,
            ..AmperConfig::default()
        };
        let mut acc = Accelerator::from_store(&store, &cfg, 5)
            .unwrap()
            .with_csb_capacity(50);
        let hw = acc.sample(&cfg).unwrap();
        if hw.csp_size > 0 {
            assert_eq!(hw.csp_size, 50);
            assert_eq!(hw.dropped, 150);
        }
        assert_eq!(hw.batch.slots.len(), 64);
    }

    #[test]
    fn empty_csp_falls_back_to_store() {
        let store = PriorityStore::from_values(&[0.9, 0.95], 1.0, Codec::default()).unwrap();
        let cfg = AmperConfig {
            groups: 1,
            lambda_prime: 1e-6,
            ..AmperConfig::default()
        };
        let mut acc = Accelerator::from_store(&store, &cfg, 5).unwrap();
        let mut fallbacks = 0;
        for _ in 0..20 {
            let hw = acc.sample(&cfg).unwrap();
            fallbacks += hw.batch.fallback as usize;
            assert!(hw.batch.slots.iter().all(|&s| s < 2));
        }
        assert!(fallbacks > 0);
    }
}
