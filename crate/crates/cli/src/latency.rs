use std::io;
use std::path::PathBuf;

use amper::amper::Variant;
use amper::latency::{estimate_update, sweep, write_csv, LatencyTable};

use crate::lists::{f64_list, usize_list, F64List, UsizeList};
use crate::{usage, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// `knn` or `frnn`.
    #[arg(long, default_value = "frnn")]
    variant: Variant,
    /// Replay memory size; CSP size is `round(ratio * size)`.
    #[arg(long, default_value_t = 10_000)]
    size: usize,
    /// Group counts, comma separated.
    #[arg(long, value_parser = usize_list, default_value = "20")]
    m: UsizeList,
    #[arg(long, value_parser = f64_list, default_value = "0.15")]
    ratio: F64List,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// JSON object overriding any of the default component delays.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Also report the cost of this many priority updates.
    #[arg(long)]
    updates: Option<usize>,
    /// Emit CSV rows even for a single configuration.
    #[arg(long)]
    csv: bool,
}

pub fn run(a: Args) -> CliResult<()> {
    let table = match &a.table {
        Some(p) => LatencyTable::from_path(p).map_err(|e| usage(e.to_string()))?,
        None => LatencyTable::default(),
    };
    let m: Vec<usize> = a.m.0;
    let ratios: Vec<f64> = a.ratio.0;
    if m.contains(&0) || a.batch == 0 {
        return Err(usage("group count and batch must be >= 1"));
    }
    if ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(usage("CSP ratios must be >= 0"));
    }
    let rows = sweep(&table, a.variant, &m, &ratios, a.size, a.batch);
    if rows.len() == 1 && !a.csv {
        let mut out = serde_json::to_value(&rows[0].report)?;
        out["csp_ratio"] = rows[0].csp_ratio.into();
        out["table"] = serde_json::to_value(table)?;
        if let Some(n) = a.updates {
            out["update_ns"] = estimate_update(&table, n).into();
        }
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        write_csv(&rows, io::stdout().lock())?;
    }
    Ok(())
}
