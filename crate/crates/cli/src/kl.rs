use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use amper::amper::Variant;
use amper::eval::{
    collect_histograms, random_store, sweep_grid, trend, write_histogram_csv, write_sweep_csv,
    Resolution, SamplingErrorConfig, SweepSpec,
};

use crate::lists::{f64_list, usize_list, F64List, UsizeList};
use crate::{resolve_out, usage, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Store sizes, comma separated.
    #[arg(long, value_parser = usize_list)]
    size: UsizeList,
    /// Group counts, comma separated.
    #[arg(long, value_parser = usize_list, default_value = "2,4,8,12")]
    m: UsizeList,
    /// Target CSP ratios: `a,b,c` or `start:stop:step`.
    #[arg(long, value_parser = f64_list, default_value = "0.03:0.15:0.03")]
    ratio: F64List,
    /// Sampling calls per sampler and cell.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Repetitions per cell with fresh sampling seeds.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// `slots` or `rank:<bins>`.
    #[arg(long, default_value = "rank:64")]
    resolution: Resolution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-cell `slot_index,count` histograms.
    #[arg(long)]
    histograms: Option<PathBuf>,
}

pub fn run(a: Args) -> CliResult<()> {
    let sizes: Vec<usize> = a.size.0;
    let m: Vec<usize> = a.m.0;
    let ratios: Vec<f64> = a.ratio.0;
    if sizes.is_empty() {
        return Err(usage("--size is required"));
    }
    if sizes.contains(&0) || m.contains(&0) || a.runs == 0 || a.batch == 0 {
        return Err(usage("sizes, group counts, runs and batch must be >= 1"));
    }
    if ratios.iter().any(|r| !(*r > 0.0)) {
        return Err(usage("CSP ratios must be > 0"));
    }
    let spec = SweepSpec {
        store_sizes: sizes,
        groups: m,
        csp_ratios: ratios,
        runs: a.runs,
        batch_size: a.batch,
        resolution: a.resolution,
        replicates: a.replicates.max(1),
        seed: a.seed,
    };
    eprintln!(
        "# kl-sweep seed={} resolution={} replicates={}",
        spec.seed, spec.resolution, spec.replicates
    );
    let reports = sweep_grid(&spec)?;

    match &a.out {
        Some(path) => {
            let path = resolve_out(path);
            write_sweep_csv(BufWriter::new(File::create(&path)?), &reports)?;
            eprintln!("wrote {}", path.display());
        }
        None => write_sweep_csv(io::stdout().lock(), &reports)?,
    }
    for &size in &spec.store_sizes {
        let cells: Vec<_> = reports
            .iter()
            .filter(|r| r.store_size == size)
            .cloned()
            .collect();
        for v in [Variant::Knn, Variant::Frnn] {
            if let Some(t) = trend(&cells, v) {
                eprintln!(
                    "# size={size} {v}: spearman(m) {:.3} spearman(ratio) {:.3} (pooled {:.3} / {:.3})",
                    t.slice_m, t.slice_ratio, t.pooled_m, t.pooled_ratio
                );
            }
        }
    }

    if let Some(dir) = &a.histograms {
        let dir = resolve_out(dir);
        fs::create_dir_all(&dir)?;
        for r in reports.iter() {
            let store = random_store(
                r.store_size,
                spec.seed.wrapping_add(
                    spec.store_sizes
                        .iter()
                        .position(|&s| s == r.store_size)
                        .expect("listed size") as u64,
                ),
            )?;
            let cfg = SamplingErrorConfig {
                store_size: r.store_size,
                groups: r.groups,
                csp_ratio: r.csp_ratio,
                runs: spec.runs,
                batch_size: spec.batch_size,
                resolution: spec.resolution,
                seed: r.seed,
            };
            let h = collect_histograms(&store, &cfg)?;
            for (name, dist) in [
                ("per", &h.per_ref),
                ("uniform", &h.uniform),
                ("amper-k", &h.amper_k),
                ("amper-fr", &h.amper_fr),
            ] {
                let file = dir.join(format!(
                    "n{}_m{}_r{}_s{}_{name}.csv",
                    r.store_size, r.groups, r.csp_ratio, r.seed
                ));
                let mut w = BufWriter::new(File::create(file)?);
                write_histogram_csv(&mut w, dist)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}
