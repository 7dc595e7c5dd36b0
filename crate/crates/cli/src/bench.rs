use std::time::Instant;

use amper::amper::AmperConfig;
use amper::eval::random_store;
use amper::latency::{estimate, LatencyTable};
use amper::{AmperTuning, Codec, Replay, SamplerKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::lists::{usize_list, UsizeList};
use crate::{usage, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Store sizes, comma separated.
    #[arg(long, value_parser = usize_list, default_value = "5000,10000,20000")]
    sizes: UsizeList,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 0.15)]
    ratio: f64,
    /// Timed batches per sampler and size.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub sampler: SamplerKind,
    pub size: usize,
    pub batch: usize,
    pub wall_ns: f64,
    pub mean_csp: Option<f64>,
    /// Accelerator latency model for the same CSP size; AMPER samplers only.
    pub model_ns: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub m: usize,
    pub ratio: f64,
    pub iters: usize,
    pub rows: Vec<BenchRow>,
}

pub fn run(a: Args) -> CliResult<()> {
    let sizes: Vec<usize> = a.sizes.0;
    if sizes.is_empty() || sizes.contains(&0) || a.batch == 0 || a.m == 0 || a.iters == 0 {
        return Err(usage("sizes, batch, m and iters must be >= 1"));
    }
    if !(a.ratio > 0.0) {
        return Err(usage("--ratio must be > 0"));
    }
    let table = LatencyTable::default();
    let mut rows = Vec::new();
    for (si, &size) in sizes.iter().enumerate() {
        let store = random_store(size, a.seed.wrapping_add(si as u64))?;
        for kind in SamplerKind::ALL {
            let tuning = AmperTuning {
                target_ratio: Some(a.ratio),
                track_max: false,
            };
            let cfg = AmperConfig {
                groups: a.m,
                batch_size: a.batch,
                ..AmperConfig::default()
            };
            let mut replay = Replay::new(
                kind,
                size,
                1.0,
                Codec::default(),
                cfg,
                tuning,
                (a.seed as u32) | 1,
            )?;
            for v in store.values() {
                replay.insert(v)?;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut csp = 0.0;
            let start = Instant::now();
            for _ in 0..a.iters {
                std::hint::black_box(replay.sample(a.batch, &mut rng)?);
                csp += replay.last_csp_size() as f64;
            }
            let wall_ns = start.elapsed().as_nanos() as f64 / a.iters as f64;
            let mean_csp = kind.variant().map(|_| csp / a.iters as f64);
            let model_ns = kind
                .variant()
                .zip(mean_csp)
                .map(|(v, c)| estimate(&table, v, a.m, c.round() as usize, a.batch).total_ns);
            rows.push(BenchRow {
                sampler: kind,
                size,
                batch: a.batch,
                wall_ns,
                mean_csp,
                model_ns,
            });
        }
    }
    let report = BenchReport {
        seed: a.seed,
        m: a.m,
        ratio: a.ratio,
        iters: a.iters,
        rows,
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "# sample-bench seed={} m={} ratio={} iters={}",
            report.seed, report.m, report.ratio, report.iters
        );
        println!(
            "{:<12} {:>7} {:>12} {:>10} {:>10}",
            "sampler", "size", "wall_ns", "csp", "model_ns"
        );
        for r in &report.rows {
            let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.1}"));
            println!(
                "{:<12} {:>7} {:>12.0} {:>10} {:>10}",
                r.sampler.name(),
                r.size,
                r.wall_ns,
                opt(r.mean_csp),
                opt(r.model_ns)
            );
        }
    }
    Ok(())
}
