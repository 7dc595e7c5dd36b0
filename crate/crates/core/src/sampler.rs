//! One replay interface over every sampling strategy.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::amper::{self, AmperConfig, Variant};
use crate::error::{Error, Result};
use crate::fixed::Codec;
use crate::replay::PriorityMemory;
use crate::tcam::Accelerator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerKind {
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "per")]
    Per,
    #[serde(rename = "amper-k")]
    AmperK,
    #[serde(rename = "amper-fr")]
    AmperFr,
    /// AMPER-fr executed on the simulated TCAM hardware path.
    #[serde(rename = "amper-fr-hw")]
    AmperFrHw,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] = [
        SamplerKind::Uniform,
        SamplerKind::Per,
        SamplerKind::AmperK,
        SamplerKind::AmperFr,
        SamplerKind::AmperFrHw,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Per => "per",
            SamplerKind::AmperK => "amper-k",
            SamplerKind::AmperFr => "amper-fr",
            SamplerKind::AmperFrHw => "amper-fr-hw",
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        match self {
            SamplerKind::AmperK => Some(Variant::Knn),
            SamplerKind::AmperFr | SamplerKind::AmperFrHw => Some(Variant::Frnn),
            _ => None,
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Argument(format!("unknown replay {s:?}; expected one of uniform, per, amper-k, amper-fr, amper-fr-hw"))
        })
    }
}

/// How the AMPER hyperparameters follow the live priority distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmperTuning {
    /// Recompute the scaling factor before each draw so the expected CSP
    /// is this fraction of the store. `None` keeps `lambda`/`lambda'` fixed.
    pub target_ratio: Option<f64>,
    /// Use the current maximum stored priority as `v_max`.
    pub track_max: bool,
}

impl Default for AmperTuning {
    fn default() -> Self {
        Self {
            target_ratio: Some(0.15),
            track_max: true,
        }
    }
}

/// Priority memory plus the sampler that reads it. Every write reaches the
/// store, the sum tree and (for the hardware sampler) the TCAM bank.
#[derive(Debug, Clone)]
pub struct Replay {
    kind: SamplerKind,
    memory: PriorityMemory,
    amper: AmperConfig,
    tuning: AmperTuning,
    hw: Option<Accelerator>,
    last_csp: usize,
}

impl Replay {
    pub fn new(
        kind: SamplerKind,
        capacity: usize,
        v_max: f64,
        codec: Codec,
        amper: AmperConfig,
        tuning: AmperTuning,
        hw_seed: u32,
    ) -> Result<Self> {
        let mut amper = amper;
        if let Some(variant) = kind.variant() {
            amper.variant = variant;
            amper.validate()?;
        }
        let hw = match kind {
            SamplerKind::AmperFrHw => Some(Accelerator::new(capacity, codec, &amper, hw_seed)?),
            _ => None,
        };
        Ok(Self {
            kind,
            memory: PriorityMemory::new(capacity, v_max, codec)?,
            amper,
            tuning,
            hw,
            last_csp: 0,
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn memory(&self) -> &PriorityMemory {
        &self.memory
    }

    pub fn accelerator(&self) -> Option<&Accelerator> {
        self.hw.as_ref()
    }

    pub fn accelerator_mut(&mut self) -> Option<&mut Accelerator> {
        self.hw.as_mut()
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }

    /// CSP size of the most recent AMPER draw.
    pub fn last_csp_size(&self) -> usize {
        self.last_csp
    }

    fn mirror(&mut self, slot: usize) -> Result<()> {
        if let Some(hw) = self.hw.as_mut() {
            hw.write(
                slot,
                self.memory.store().get(slot).expect("slot just written"),
            )?;
        }
        Ok(())
    }

    pub fn insert(&mut self, p: f64) -> Result<usize> {
        let (slot, _) = self.memory.insert(p)?;
        self.mirror(slot)?;
        Ok(slot)
    }

    /// Inserts at the current maximum priority (`initial` when empty).
    pub fn insert_max(&mut self, initial: f64) -> Result<usize> {
        let (slot, _) = self.memory.insert_max(initial)?;
        self.mirror(slot)?;
        Ok(slot)
    }

    pub fn update(&mut self, slots: &[usize], priorities: &[f64]) -> Result<()> {
        self.memory.update_batch(slots, priorities)?;
        for &slot in slots {
            self.mirror(slot)?;
        }
        Ok(())
    }

    /// The AMPER configuration a draw would use right now.
    pub fn effective_config(&self, b: usize) -> Result<AmperConfig> {
        let mut cfg = self.amper;
        cfg.batch_size = b;
        if self.tuning.track_max {
            if let Some(max) = self.memory.store().max_value() {
                cfg.v_max = max;
            }
        }
        match self.tuning.target_ratio {
            Some(ratio) => amper::calibrated(self.memory.store(), &cfg, ratio),
            None => Ok(cfg),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, b: usize, rng: &mut R) -> Result<Vec<usize>> {
        match self.kind {
            SamplerKind::Uniform => self.memory.sample_uniform(b, rng),
            SamplerKind::Per => self.memory.sample_per(b, rng),
            SamplerKind::AmperK | SamplerKind::AmperFr => {
                if self.memory.is_empty() {
                    return Err(Error::State("priority memory is empty".into()));
                }
                let cfg = self.effective_config(b)?;
                let store = self.memory.store();
                let csp = amper::build_csp(store, &cfg, rng)?;
                self.last_csp = csp.len();
                Ok(amper::sample_from_csp(store, &csp, b, rng).slots)
            }
            SamplerKind::AmperFrHw => {
                if self.memory.is_empty() {
                    return Err(Error::State("priority memory is empty".into()));
                }
                let cfg = self.effective_config(b)?;
                let out = self.hw.as_mut().expect("hardware sampler").sample(&cfg)?;
                if out.dropped > 0 {
                    log::warn!("candidate set buffer dropped {} entries", out.dropped);
                }
                self.last_csp = out.csp_size;
                Ok(out.batch.slots)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn replay(kind: SamplerKind) -> Replay {
        Replay::new(
            kind,
            64,
            10.0,
            Codec::default(),
            AmperConfig::default(),
            AmperTuning::default(),
            7,
        )
        .unwrap()
    }

    #[test]
    fn names_round_trip() {
        for k in SamplerKind::ALL {
            assert_eq!(k.name().parse::<SamplerKind>().unwrap(), k);
        }
        let err = "tree".parse::<SamplerKind>().unwrap_err().to_string();
        assert!(err.contains("amper-fr-hw"));
    }

    #[test]
    fn every_sampler_draws_valid_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in SamplerKind::ALL {
            let mut r = replay(k);
            assert!(r.sample(4, &mut rng).is_err());
            for i in 0..40 {
                r.insert(0.1 + i as f64 * 0.2).unwrap();
            }
            let s = r.sample(32, &mut rng).unwrap();
            assert_eq!(s.len(), 32);
            assert!(s.iter().all(|&x| x < 40), "{k}");
        }
    }

    #[test]
    fn hardware_mirror_follows_writes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = replay(SamplerKind::AmperFrHw);
        for _ in 0..100 {
            r.insert_max(1.0).unwrap();
        }
        for _ in 0..50 {
            let slots = r.sample(8, &mut rng).unwrap();
            let ps: Vec<f64> = slots.iter().map(|_| rng.gen_range(0.01..10.0)).collect();
            r.update(&slots, &ps).unwrap();
        }
        assert!(r.accelerator().unwrap().mirrors(r.memory().store()));
        assert!(r.memory().is_consistent());
    }
}
