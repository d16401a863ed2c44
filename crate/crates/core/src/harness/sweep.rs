//! Evaluation over a grid of vehicle counts and policies.

use std::path::Path;

use log::warn;
use serde::Serialize;

use super::evaluate::{evaluate, MetricsReport, PolicySpec};
use crate::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub n_vehicles: usize,
    pub policy: String,
    pub result: std::result::Result<MetricsReport, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub policy: String,
    pub n_vehicles: usize,
    pub mean: f64,
    pub ci95_half_width: f64,
    pub n_seeds: usize,
}

/// Sorted, deduplicated vehicle counts; duplicates are logged.
pub fn dedup_counts(counts: &[usize]) -> Vec<usize> {
    let mut out = counts.to_vec();
    out.sort_unstable();
    let before = out.len();
    out.dedup();
    if out.len() != before {
        warn!("duplicate vehicle counts in {counts:?} dropped");
    }
    out
}

/// Evaluates every (vehicle count, policy) cell. A failing cell is recorded
/// and the sweep goes on.
pub fn sweep(base: &RunConfig, counts: &[usize], policies: &[PolicySpec]) -> Result<Vec<SweepCell>> {
    if policies.is_empty() {
        return Err(Error::InvalidArgument("no policies to sweep".into()));
    }
    if counts.is_empty() {
        return Err(Error::InvalidArgument("no vehicle counts to sweep".into()));
    }
    let mut cells = Vec::new();
    for n in dedup_counts(counts) {
        let mut cfg = base.clone();
        cfg.n_vehicles = n;
        for p in policies {
            let result = evaluate(&cfg, p).map_err(|e| {
                warn!("cell n_vehicles={n} policy={}: {e}", p.kind());
                e.to_string()
            });
            cells.push(SweepCell { n_vehicles: n, policy: p.kind().to_string(), result });
        }
    }
    Ok(cells)
}

fn rows(cells: &[SweepCell], pick: impl Fn(&MetricsReport) -> (f64, f64, usize)) -> Vec<SweepRow> {
    cells
        .iter()
        .filter_map(|c| {
            let r = c.result.as_ref().ok()?;
            let (mean, ci95_half_width, n_seeds) = pick(r);
            Some(SweepRow { policy: c.policy.clone(), n_vehicles: c.n_vehicles, mean, ci95_half_width, n_seeds })
        })
        .collect()
}

const PLOT_SCRIPT: &str = r#"import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

for name, label in [("v2i_rate.csv", "Mean V2I sum rate (Mbps)"), ("satisfaction.csv", "Probability of satisfied V2V")]:
    series = defaultdict(list)
    with open(name) as f:
        for row in csv.DictReader(f):
            series[row["policy"]].append((int(row["n_vehicles"]), float(row["mean"]), float(row["ci95_half_width"])))
    plt.figure()
    scale = 1e-6 if name == "v2i_rate.csv" else 1.0
    for policy, pts in sorted(series.items()):
        pts.sort()
        plt.errorbar([p[0] for p in pts], [p[1] * scale for p in pts], yerr=[p[2] * scale for p in pts], marker="o", capsize=3, label=policy)
    plt.xlabel("Number of vehicles")
    plt.ylabel(label)
    plt.legend()
    plt.grid(True)
    plt.savefig(name.replace(".csv", ".png"), dpi=150)
    if "--show" in sys.argv:
        plt.show()
"#;

/// Writes `v2i_rate.csv`, `satisfaction.csv`, `failures.csv` and `plot.py`.
pub fn write_sweep(dir: &Path, cells: &[SweepCell]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, data: &[SweepRow]| -> Result<()> {
        let path = dir.join(name);
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(f);
        if data.is_empty() {
            w.write_record(["policy", "n_vehicles", "mean", "ci95_half_width", "n_seeds"])?;
        }
        for r in data {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write("v2i_rate.csv", &rows(cells, |r| (r.v2i_rate_bps.mean, r.v2i_rate_bps.ci95_half_width, r.seeds.len())))?;
    write("satisfaction.csv", &rows(cells, |r| (r.satisfied.mean, r.satisfied.ci95_half_width, r.seeds.len())))?;
    let path = dir.join("failures.csv");
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["policy", "n_vehicles", "error"])?;
    for c in cells {
        if let Err(e) = &c.result {
            w.write_record([c.policy.as_str(), &c.n_vehicles.to_string(), e.as_str()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let path = dir.join("plot.py");
    std::fs::write(&path, PLOT_SCRIPT).map_err(|e| Error::io(&path, e))
}
