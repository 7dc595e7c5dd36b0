//! Analytical per-batch latency model for the sampling accelerator.
//!
//! Searches hit every array in parallel, so one query costs one search
//! delay regardless of bank size. Candidate-buffer writes are serialized,
//! one entry per write, which makes the buffer the bottleneck as the
//! candidate set grows.
//!
//! ```text
//! frnn: m*(urng + qg_frnn + exact_search) + csp*csb_write + b*(urng + csb_read)
//! knn:  m*(urng + qg_knn) + csp*(best_search + csb_write) + b*(urng + csb_read)
//! ```

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::amper::Variant;
use crate::error::{Error, Result};
use crate::tcam::{StepKind, Trace};

/// Component delays in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyTable {
    pub exact_search: f64,
    pub exact_write: f64,
    pub best_search: f64,
    pub best_write: f64,
    pub csb_read: f64,
    pub csb_write: f64,
    pub urng: f64,
    pub qg_knn: f64,
    pub qg_frnn: f64,
}

impl Default for LatencyTable {
    fn default() -> Self {
        Self {
            exact_search: 0.58,
            exact_write: 2.0,
            best_search: 1.0,
            best_write: 2.0,
            csb_read: 0.78,
            csb_write: 0.78,
            urng: 1.71,
            qg_knn: 3.57,
            qg_frnn: 2.02,
        }
    }
}

impl LatencyTable {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("exact_search", self.exact_search),
            ("exact_write", self.exact_write),
            ("best_search", self.best_search),
            ("best_write", self.best_write),
            ("csb_read", self.csb_read),
            ("csb_write", self.csb_write),
            ("urng", self.urng),
            ("qg_knn", self.qg_knn),
            ("qg_frnn", self.qg_frnn),
        ];
        match all.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            Some((name, v)) => Err(Error::Argument(format!(
                "delay {name} must be > 0, got {v}"
            ))),
            None => Ok(()),
        }
    }

    /// Defaults with any fields present in the JSON object overridden.
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)
            .map_err(|e| Error::Argument(format!("latency table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn search(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Knn => self.best_search,
            Variant::Frnn => self.exact_search,
        }
    }

    fn qgen(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Knn => self.qg_knn,
            Variant::Frnn => self.qg_frnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub variant: Variant,
    pub m: usize,
    pub csp_size: usize,
    pub batch: usize,
    pub total_ns: f64,
    /// Representative draws plus query generation.
    pub qgen_ns: f64,
    pub search_ns: f64,
    pub csb_ns: f64,
    pub readout_ns: f64,
}

impl LatencyReport {
    fn new(variant: Variant, m: usize, csp_size: usize, batch: usize, parts: [f64; 4]) -> Self {
        let [qgen_ns, search_ns, csb_ns, readout_ns] = parts;
        Self {
            variant,
            m,
            csp_size,
            batch,
            total_ns: qgen_ns + search_ns + csb_ns + readout_ns,
            qgen_ns,
            search_ns,
            csb_ns,
            readout_ns,
        }
    }

    /// Speedup implied by a measured baseline latency for the same batch.
    pub fn speedup_over(&self, baseline_ns: f64) -> f64 {
        baseline_ns / self.total_ns
    }
}

pub fn estimate_frnn(table: &LatencyTable, m: usize, csp_size: usize, b: usize) -> LatencyReport {
    let (mf, cf, bf) = (m as f64, csp_size as f64, b as f64);
    LatencyReport::new(
        Variant::Frnn,
        m,
        csp_size,
        b,
        [
            mf * (table.urng + table.qg_frnn),
            mf * table.exact_search,
            cf * table.csb_write,
            bf * (table.urng + table.csb_read),
        ],
    )
}

pub fn estimate_knn(table: &LatencyTable, m: usize, csp_size: usize, b: usize) -> LatencyReport {
    let (mf, cf, bf) = (m as f64, csp_size as f64, b as f64);
    LatencyReport::new(
        Variant::Knn,
        m,
        csp_size,
        b,
        [
            mf * (table.urng + table.qg_knn),
            cf * table.best_search,
            cf * table.csb_write,
            bf * (table.urng + table.csb_read),
        ],
    )
}

pub fn estimate(
    table: &LatencyTable,
    variant: Variant,
    m: usize,
    csp_size: usize,
    b: usize,
) -> LatencyReport {
    match variant {
        Variant::Knn => estimate_knn(table, m, csp_size, b),
        Variant::Frnn => estimate_frnn(table, m, csp_size, b),
    }
}

/// Serialized direct writes, one per updated priority.
pub fn estimate_update(table: &LatencyTable, n_updates: usize) -> f64 {
    n_updates as f64 * table.exact_write
}

/// Charges each step of a recorded hardware trace at its table delay.
pub fn estimate_from_trace(table: &LatencyTable, variant: Variant, trace: &Trace) -> LatencyReport {
    let mut parts = [0.0; 4];
    let mut groups = std::collections::BTreeSet::new();
    let mut csp = 0;
    let mut batch = 0;
    for s in &trace.steps {
        if let Some(g) = s.group {
            groups.insert(g);
        }
        match (s.kind, s.group) {
            (StepKind::Urng, Some(_)) => parts[0] += table.urng,
            (StepKind::Qgen, _) => parts[0] += table.qgen(variant),
            (StepKind::Search, _) => parts[1] += table.search(variant),
            (StepKind::CsbWrite, _) => {
                parts[2] += table.csb_write;
                csp += 1;
            }
            (StepKind::Urng, None) => parts[3] += table.urng,
            (StepKind::CsbRead, _) => {
                parts[3] += table.csb_read;
                batch += 1;
            }
        }
    }
    LatencyReport::new(variant, groups.len(), csp, batch, parts)
}

/// One row of a latency sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub csp_ratio: f64,
    pub report: LatencyReport,
}

/// Reports for every `(m, ratio)` pair, `csp_size = round(ratio * store_size)`,
/// ordered by `m` then ratio as given.
pub fn sweep(
    table: &LatencyTable,
    variant: Variant,
    m_list: &[usize],
    ratio_list: &[f64],
    store_size: usize,
    b: usize,
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(m_list.len() * ratio_list.len());
    for &m in m_list {
        for &ratio in ratio_list {
            let csp = (ratio * store_size as f64).round() as usize;
            rows.push(SweepRow {
                csp_ratio: ratio,
                report: estimate(table, variant, m, csp, b),
            });
        }
    }
    rows
}

pub const CSV_HEADER: &str =
    "variant,m,csp_ratio,csp_size,batch,total_ns,qgen_ns,search_ns,csb_ns,readout_ns";

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        let r = &row.report;
        writeln!(
            w,
            "{},{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2}",
            r.variant,
            r.m,
            row.csp_ratio,
            r.csp_size,
            r.batch,
            r.total_ns,
            r.qgen_ns,
            r.search_ns,
            r.csb_ns,
            r.readout_ns
        )?;
    }
    Ok(())
}
