//! Wall-clock benchmark of the simulation over topologies and network sizes.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::sync::Mutex;

use super::config::{Mode, ScenarioConfig};
use super::run::{simulate_only, RunError, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub mode: Mode,
    pub topologies: Vec<String>,
    pub sizes: Vec<usize>,
    /// The minimum over this many repetitions is reported.
    pub repeats: usize,
    pub threads: usize,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(mode: Mode, topologies: &[&str], sizes: &[usize]) -> Self {
        Self {
            mode,
            topologies: topologies.iter().map(|s| s.to_string()).collect(),
            sizes: sizes.to_vec(),
            repeats: 1,
            threads: 1,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub topology: String,
    pub m: usize,
    pub seconds: f64,
}

fn cell_config(spec: &BenchSpec, topology: &str, m: usize) -> Result<ScenarioConfig, RunError> {
    let mut cfg = ScenarioConfig::reference(spec.mode, topology, m).map_err(|e| RunError::new(Stage::Network, e))?;
    cfg.seed = spec.seed;
    cfg.certificate_enabled = false;
    Ok(cfg)
}

fn time_cell(spec: &BenchSpec, topology: &str, m: usize) -> Result<BenchRow, RunError> {
    let cfg = cell_config(spec, topology, m)?;
    let mut best = f64::INFINITY;
    for _ in 0..spec.repeats.max(1) {
        best = best.min(simulate_only(&cfg)?);
    }
    Ok(BenchRow {
        topology: topology.to_string(),
        m,
        seconds: best,
    })
}

/// Times the reference simulation for every `(topology, m)` cell. Cells
/// are distributed over `threads` workers; rows come back in input order.
pub fn timing_benchmark(spec: &BenchSpec) -> Result<Vec<BenchRow>, RunError> {
    if spec.sizes.iter().any(|&m| m == 0) {
        return Err(RunError::new(Stage::Network, "benchmark sizes must be at least 1"));
    }
    let cells: Vec<(usize, &str, usize)> = spec
        .topologies
        .iter()
        .flat_map(|t| spec.sizes.iter().map(move |&m| (t.as_str(), m)))
        .enumerate()
        .map(|(i, (t, m))| (i, t, m))
        .collect();
    let next = Mutex::new(0usize);
    let results = Mutex::new(vec![None; cells.len()]);
    let workers = spec.threads.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = {
                    let mut n = next.lock().expect("benchmark queue");
                    let idx = *n;
                    *n += 1;
                    idx
                };
                let Some(&(slot, topology, m)) = cells.get(idx) else {
                    break;
                };
                let row = time_cell(spec, topology, m);
                results.lock().expect("benchmark results")[slot] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("benchmark results")
        .into_iter()
        .map(|r| r.expect("every cell timed"))
        .collect()
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut w: W) -> io::Result<()> {
    writeln!(w, "topology,m,seconds")?;
    for r in rows {
        writeln!(w, "{},{},{:.16e}", r.topology, r.m, r.seconds)?;
    }
    Ok(())
}

/// Table with one row per topology and one column per size.
pub fn render_bench_table(mode: Mode, rows: &[BenchRow]) -> String {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.m).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut topologies: Vec<&str> = Vec::new();
    for r in rows {
        if !topologies.contains(&r.topology.as_str()) {
            topologies.push(&r.topology);
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<10}", format!("{mode}"));
    for m in &sizes {
        let _ = write!(out, "{:>12}", format!("m={m}"));
    }
    out.push('\n');
    for t in topologies {
        let _ = write!(out, "{t:<10}");
        for m in &sizes {
            match rows.iter().find(|r| r.topology == t && r.m == *m) {
                Some(r) => {
                    let _ = write!(out, "{:>12.4}", r.seconds);
                }
                None => {
                    let _ = write!(out, "{:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// `t(largest m) / t(smallest m)` per topology.
pub fn scaling_ratios(rows: &[BenchRow]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for r in rows {
        if out.iter().any(|(t, _)| *t == r.topology) {
            continue;
        }
        let same: Vec<&BenchRow> = rows.iter().filter(|x| x.topology == r.topology).collect();
        let lo = same.iter().min_by_key(|x| x.m).expect("non-empty");
        let hi = same.iter().max_by_key(|x| x.m).expect("non-empty");
        out.push((r.topology.clone(), hi.seconds / lo.seconds));
    }
    out
}
