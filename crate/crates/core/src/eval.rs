//! Sampling-error measurement: empirical distributions, KL divergence and
//! the parameter sweeps built on them.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amper::{self, AmperConfig, Variant};
use crate::error::{Error, Result};
use crate::fixed::Codec;
use crate::replay::{PriorityMemory, PriorityStore};

/// Sample counts over `n` categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalDist {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![0; n],
            total: 0,
        }
    }

    pub fn from_samples(n: usize, samples: &[usize]) -> Result<Self> {
        let mut d = Self::new(n);
        d.extend(samples)?;
        Ok(d)
    }

    pub fn extend(&mut self, samples: &[usize]) -> Result<()> {
        for &s in samples {
            let limit = self.counts.len();
            *self
                .counts
                .get_mut(s)
                .ok_or(Error::Index { index: s, limit })? += 1;
        }
        self.total += samples.len() as u64;
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Regroups categories: category `i` goes to bin `map[i]`.
    pub fn coarsen(&self, map: &[usize], bins: usize) -> Result<Self> {
        if map.len() != self.counts.len() {
            return Err(Error::Argument(format!(
                "bin map has {} entries, expected {}",
                map.len(),
                self.counts.len()
            )));
        }
        let mut out = Self::new(bins);
        for (&c, &b) in self.counts.iter().zip(map) {
            *out.counts.get_mut(b).ok_or(Error::Index {
                index: b,
                limit: bins,
            })? += c;
        }
        out.total = self.total;
        Ok(out)
    }

    /// Add-one smoothed probabilities.
    pub fn smoothed(&self) -> Vec<f64> {
        let denom = (self.total + self.counts.len() as u64) as f64;
        self.counts
            .iter()
            .map(|&c| (c + 1) as f64 / denom)
            .collect()
    }
}

/// `KL(p || q) = sum p ln(p / q)` in nats over normalized distributions.
/// Terms with `p_i = 0` contribute nothing; `q_i = 0 < p_i` gives infinity.
pub fn kl_normalized(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Argument(format!(
            "distribution lengths differ or are empty: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if !(pi >= 0.0) || !(qi >= 0.0) {
            return Err(Error::Domain("negative or NaN probability".into()));
        }
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl)
}

/// KL of the sampler histogram `p` from the reference histogram `q`,
/// add-one smoothed and scaled by the sample count of `p`.
pub fn kl_divergence(p: &EmpiricalDist, q: &EmpiricalDist) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Argument(format!(
            "histogram sizes differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_normalized(&p.smoothed(), &q.smoothed())? * p.total as f64)
}

/// Categories the KL is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    /// One category per replay slot.
    Slots,
    /// Slots sorted by priority and split into this many equal-population
    /// bins.
    RankBins(usize),
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::RankBins(64)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Slots => f.write_str("slots"),
            Resolution::RankBins(b) => write!(f, "rank:{b}"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "slots" {
            return Ok(Resolution::Slots);
        }
        s.strip_prefix("rank:")
            .and_then(|b| b.parse::<usize>().ok())
            .filter(|&b| b > 0)
            .map(Resolution::RankBins)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "bad resolution {s:?}; expected `slots` or `rank:<bins>`"
                ))
            })
    }
}

/// Slot-to-bin map for `res` over the occupied slots of `store`.
pub fn bin_map(store: &PriorityStore, res: Resolution) -> (Vec<usize>, usize) {
    let n = store.len();
    match res {
        Resolution::Slots => ((0..n).collect(), n),
        Resolution::RankBins(bins) => {
            let bins = bins.min(n).max(1);
            let mut map = vec![0; n];
            for (rank, &(_, slot)) in store.sorted_index().iter().enumerate() {
                map[slot as usize] = rank * bins / n;
            }
            (map, bins)
        }
    }
}

/// Parameters of one sampling-error measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingErrorConfig {
    pub store_size: usize,
    pub groups: usize,
    /// Target `|CSP| / store_size`; the scaling factors are derived from it.
    pub csp_ratio: f64,
    /// Sampling calls per sampler.
    pub runs: usize,
    pub batch_size: usize,
    pub resolution: Resolution,
    pub seed: u64,
}

impl Default for SamplingErrorConfig {
    fn default() -> Self {
        Self {
            store_size: 10_000,
            groups: 20,
            csp_ratio: 0.15,
            runs: 100,
            batch_size: 64,
            resolution: Resolution::default(),
            seed: 0,
        }
    }
}

/// KL (sample-nats) of each sampler against a PER reference histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub store_size: usize,
    pub groups: usize,
    pub csp_ratio: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
    pub samples: u64,
    pub resolution: Resolution,
    pub seed: u64,
    pub uniform: f64,
    /// A second PER run against the reference: the noise floor.
    pub per_self: f64,
    pub amper_k: f64,
    pub amper_fr: f64,
    pub mean_csp_k: f64,
    pub mean_csp_fr: f64,
}

impl KlReport {
    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("uniform", self.uniform),
            ("per", self.per_self),
            ("amper-k", self.amper_k),
            ("amper-fr", self.amper_fr),
        ]
    }
}

/// Uniform `[0, 1)` priorities in a store of `n` slots.
pub fn random_store(n: usize, seed: u64) -> Result<PriorityStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    PriorityStore::from_values(&values, 1.0, Codec::default())
}

/// Raw slot histograms for each sampler.
#[derive(Debug, Clone)]
pub struct Histograms {
    pub per_ref: EmpiricalDist,
    pub per: EmpiricalDist,
    pub uniform: EmpiricalDist,
    pub amper_k: EmpiricalDist,
    pub amper_fr: EmpiricalDist,
    pub mean_csp_k: f64,
    pub mean_csp_fr: f64,
    pub lambda: f64,
    pub lambda_prime: f64,
}

/// Draws `cfg.runs` batches from every sampler over `store`.
pub fn collect_histograms(store: &PriorityStore, cfg: &SamplingErrorConfig) -> Result<Histograms> {
    let n = store.len();
    if n == 0 {
        return Err(Error::State("store is empty".into()));
    }
    let memory = PriorityMemory::from_store(store.clone());
    let base = AmperConfig {
        groups: cfg.groups,
        batch_size: cfg.batch_size,
        ..AmperConfig::default()
    };
    let knn = amper::calibrated(
        store,
        &AmperConfig {
            variant: Variant::Knn,
            ..base
        },
        cfg.csp_ratio,
    )?;
    let frnn = amper::calibrated(
        store,
        &AmperConfig {
            variant: Variant::Frnn,
            ..base
        },
        cfg.csp_ratio,
    )?;

    let mut streams: Vec<ChaCha8Rng> = (0..5u64)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(i + 1);
            r
        })
        .collect();
    let mut h = Histograms {
        per_ref: EmpiricalDist::new(n),
        per: EmpiricalDist::new(n),
        uniform: EmpiricalDist::new(n),
        amper_k: EmpiricalDist::new(n),
        amper_fr: EmpiricalDist::new(n),
        mean_csp_k: 0.0,
        mean_csp_fr: 0.0,
        lambda: knn.lambda,
        lambda_prime: frnn.lambda_prime,
    };
    let b = cfg.batch_size;
    for _ in 0..cfg.runs {
        h.per_ref.extend(&memory.sample_per(b, &mut streams[0])?)?;
        h.per.extend(&memory.sample_per(b, &mut streams[1])?)?;
        h.uniform
            .extend(&memory.sample_uniform(b, &mut streams[2])?)?;
        for (amper_cfg, rng, dist, csp_sum) in [
            (&knn, 3, &mut h.amper_k, &mut h.mean_csp_k),
            (&frnn, 4, &mut h.amper_fr, &mut h.mean_csp_fr),
        ] {
            let csp = amper::build_csp(store, amper_cfg, &mut streams[rng])?;
            *csp_sum += csp.len() as f64;
            dist.extend(&amper::sample_from_csp(store, &csp, b, &mut streams[rng]).slots)?;
        }
    }
    let runs = cfg.runs.max(1) as f64;
    h.mean_csp_k /= runs;
    h.mean_csp_fr /= runs;
    Ok(h)
}

/// Sampling error of uniform, PER and both AMPER variants against PER.
pub fn run_sampling_error(store: &PriorityStore, cfg: &SamplingErrorConfig) -> Result<KlReport> {
    let h = collect_histograms(store, cfg)?;
    let (map, bins) = bin_map(store, cfg.resolution);
    let reference = h.per_ref.coarsen(&map, bins)?;
    let kl =
        |d: &EmpiricalDist| -> Result<f64> { kl_divergence(&d.coarsen(&map, bins)?, &reference) };
    Ok(KlReport {
        store_size: store.len(),
        groups: cfg.groups,
        csp_ratio: cfg.csp_ratio,
        lambda: h.lambda,
        lambda_prime: h.lambda_prime,
        samples: h.per_ref.total(),
        resolution: cfg.resolution,
        seed: cfg.seed,
        uniform: kl(&h.uniform)?,
        per_self: kl(&h.per)?,
        amper_k: kl(&h.amper_k)?,
        amper_fr: kl(&h.amper_fr)?,
        mean_csp_k: h.mean_csp_k,
        mean_csp_fr: h.mean_csp_fr,
    })
}

/// Grid of sampling-error measurements. Cells sharing a store size share the
/// store; each cell gets its own sampling seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub store_sizes: Vec<usize>,
    pub groups: Vec<usize>,
    pub csp_ratios: Vec<f64>,
    pub runs: usize,
    pub batch_size: usize,
    pub resolution: Resolution,
    /// Independent repetitions per cell, each with a fresh sampling seed.
    pub replicates: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            store_sizes: vec![10_000],
            groups: vec![10, 20, 40, 80],
            csp_ratios: vec![0.05, 0.1, 0.15, 0.2, 0.3],
            runs: 100,
            batch_size: 64,
            resolution: Resolution::default(),
            replicates: 1,
            seed: 0,
        }
    }
}

pub fn sweep_grid(spec: &SweepSpec) -> Result<Vec<KlReport>> {
    let mut out = Vec::new();
    for (si, &size) in spec.store_sizes.iter().enumerate() {
        let store = random_store(size, spec.seed.wrapping_add(si as u64))?;
        for &m in &spec.groups {
            for &ratio in &spec.csp_ratios {
                for rep in 0..spec.replicates.max(1) {
                    let cfg = SamplingErrorConfig {
                        store_size: size,
                        groups: m,
                        csp_ratio: ratio,
                        runs: spec.runs,
                        batch_size: spec.batch_size,
                        resolution: spec.resolution,
                        seed: cell_seed(spec.seed, size, m, ratio, rep),
                    };
                    out.push(run_sampling_error(&store, &cfg)?);
                }
            }
        }
    }
    Ok(out)
}

fn cell_seed(seed: u64, size: usize, m: usize, ratio: f64, rep: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for x in [size as u64, m as u64, ratio.to_bits(), rep as u64] {
        h = (h ^ x).wrapping_mul(0x100_0000_01b3).rotate_left(29);
    }
    h
}

pub const SWEEP_CSV_HEADER: &str = "store_size,m,scaling,ratio,sampler,kl_sample_nats,seed";

pub fn write_sweep_csv<W: Write>(mut w: W, reports: &[KlReport]) -> io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in reports {
        for (name, kl) in r.entries() {
            let scaling = match name {
                "amper-k" => r.lambda,
                "amper-fr" => r.lambda_prime,
                _ => f64::NAN,
            };
            let scaling = if scaling.is_nan() {
                String::new()
            } else {
                format!("{scaling:.6}")
            };
            writeln!(
                w,
                "{},{},{},{},{},{:.4},{}",
                r.store_size, r.groups, scaling, r.csp_ratio, name, kl, r.seed
            )?;
        }
    }
    Ok(())
}

/// `slot_index,count` rows.
pub fn write_histogram_csv<W: Write>(mut w: W, dist: &EmpiricalDist) -> io::Result<()> {
    writeln!(w, "slot_index,count")?;
    for (i, c) in dist.counts().iter().enumerate() {
        writeln!(w, "{i},{c}")?;
    }
    Ok(())
}

/// Spearman trends of AMPER KL over a sweep, replicates averaged first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// Mean over CSP-ratio slices of `rho(m, KL)`.
    pub slice_m: f64,
    /// Mean over `m` slices of `rho(ratio, KL)`.
    pub slice_ratio: f64,
    /// `rho` over all cells at once.
    pub pooled_m: f64,
    pub pooled_ratio: f64,
}

/// Trend of the `variant` KL over the `(m, ratio)` cells of one store size.
pub fn trend(reports: &[KlReport], variant: Variant) -> Option<Trend> {
    let mut cells: Vec<(usize, f64, f64, usize)> = Vec::new();
    for r in reports {
        let kl = match variant {
            Variant::Knn => r.amper_k,
            Variant::Frnn => r.amper_fr,
        };
        match cells
            .iter_mut()
            .find(|c| c.0 == r.groups && c.1 == r.csp_ratio)
        {
            Some(c) => {
                c.2 += kl;
                c.3 += 1;
            }
            None => cells.push((r.groups, r.csp_ratio, kl, 1)),
        }
    }
    let cells: Vec<(f64, f64, f64)> = cells
        .iter()
        .map(|c| (c.0 as f64, c.1, c.2 / c.3 as f64))
        .collect();
    let col = |f: fn(&(f64, f64, f64)) -> f64, xs: &[&(f64, f64, f64)]| {
        xs.iter().map(|c| f(c)).collect::<Vec<f64>>()
    };
    let all: Vec<&(f64, f64, f64)> = cells.iter().collect();
    let slice_mean = |along_m: bool| -> Option<f64> {
        let mut keys: Vec<f64> = all
            .iter()
            .map(|c| if along_m { c.1 } else { c.0 })
            .collect();
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let mut sum = 0.0;
        for k in &keys {
            let slice: Vec<&(f64, f64, f64)> = all
                .iter()
                .copied()
                .filter(|c| if along_m { c.1 == *k } else { c.0 == *k })
                .collect();
            let x = if along_m {
                col(|c| c.0, &slice)
            } else {
                col(|c| c.1, &slice)
            };
            sum += spearman(&x, &col(|c| c.2, &slice))?;
        }
        Some(sum / keys.len() as f64)
    };
    let kl = col(|c| c.2, &all);
    Some(Trend {
        slice_m: slice_mean(true)?,
        slice_ratio: slice_mean(false)?,
        pooled_m: spearman(&col(|c| c.0, &all), &kl)?,
        pooled_ratio: spearman(&col(|c| c.1, &all), &kl)?,
    })
}

/// Fractional ranks (1-based, ties averaged).
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation. `None` when either input is constant or the
/// lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}
