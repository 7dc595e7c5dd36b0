use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use amper::SamplerKind;
use amper_rlbench::dqn::{write_curve_csv, IsWeights};
use amper_rlbench::TrainConfig;

use crate::{resolve_out, usage, CliResult};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Env {
    Cartpole,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value = "cartpole")]
    env: Env,
    /// One of uniform, per, amper-k, amper-fr, amper-fr-hw.
    #[arg(long, default_value = "per")]
    replay: SamplerKind,
    #[arg(long, default_value_t = 2000)]
    er_size: usize,
    #[arg(long, default_value_t = 50_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    target_sync: usize,
    #[arg(long, default_value_t = 1000)]
    learning_starts: usize,
    /// Priority exponent.
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    /// AMPER group count.
    #[arg(long, default_value_t = 20)]
    groups: usize,
    /// AMPER target CSP ratio; the scaling factor is recalibrated per draw.
    #[arg(long, default_value_t = 0.15)]
    csp_ratio: f64,
    /// Enable importance-sampling weights (PER only).
    #[arg(long)]
    is_weights: bool,
    /// Learning curve CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the JSON summary here as well as to stdout.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn run(a: Args) -> CliResult<()> {
    let Env::Cartpole = a.env;
    if !(a.csp_ratio > 0.0) || a.groups == 0 {
        return Err(usage("--csp-ratio must be > 0 and --groups >= 1"));
    }
    let mut cfg = TrainConfig {
        total_steps: a.steps,
        er_size: a.er_size,
        batch_size: a.batch,
        gamma: a.gamma,
        learning_rate: a.lr,
        target_sync: a.target_sync,
        learning_starts: a.learning_starts,
        replay: a.replay,
        is_weights: a.is_weights.then(IsWeights::default),
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.per.alpha = a.alpha;
    cfg.amper.groups = a.groups;
    cfg.tuning.target_ratio = Some(a.csp_ratio);
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    eprintln!(
        "# train env=cartpole replay={} er_size={} steps={} seed={}",
        a.replay, a.er_size, a.steps, a.seed
    );
    let report = amper_rlbench::train(&cfg)?;
    match &a.out {
        Some(p) => write_curve_csv(BufWriter::new(File::create(resolve_out(p))?), &report)?,
        None => write_curve_csv(std::io::stdout().lock(), &report)?,
    }
    let summary = serde_json::json!({
        "env": "cartpole",
        "replay": report.sampler,
        "er_size": report.er_size,
        "steps": report.total_steps,
        "seed": report.seed,
        "episodes": report.episodes,
        "test_score": report.test_score,
        "test_returns": report.test_returns,
        "mean_csp": report.mean_csp,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    if let Some(p) = &a.summary {
        std::fs::write(resolve_out(p), format!("{text}\n"))?;
    }
    if a.out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}
