//! One-axis sensitivity sweeps.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use pairllc::garibaldi::{MAX_K, MISS_COST_MAX};
use pairllc::sim::{simulate, SimError};
use pairllc::{GaribaldiConfig, HierarchyConfig, MemoryAccess, RunConfig, SimConfig, SimReport};
use rayon::prelude::*;

use crate::{out_dir, write_file, CliError};

pub const AXIS_NAMES: &str = "k | threshold_fixed | pair_table_entries | llc_capacity | llc_associativity";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    ThresholdFixed,
    PairTableEntries,
    LlcCapacity,
    LlcAssociativity,
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "k" => SweepAxis::K,
            "threshold_fixed" => SweepAxis::ThresholdFixed,
            "pair_table_entries" => SweepAxis::PairTableEntries,
            "llc_capacity" => SweepAxis::LlcCapacity,
            "llc_associativity" => SweepAxis::LlcAssociativity,
            _ => return Err(CliError::Config(format!("unknown sweep axis `{s}`; expected one of: {AXIS_NAMES}"))),
        })
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::K => "k",
            SweepAxis::ThresholdFixed => "threshold_fixed",
            SweepAxis::PairTableEntries => "pair_table_entries",
            SweepAxis::LlcCapacity => "llc_capacity",
            SweepAxis::LlcAssociativity => "llc_associativity",
        })
    }
}

/// Accepts plain integers and, for sizes, a `K`/`M` (binary) suffix.
fn parse_value(s: &str) -> Result<u64, CliError> {
    let t = s.trim();
    let (digits, mul) = match t.char_indices().last() {
        Some((i, 'K' | 'k')) => (&t[..i], 1024),
        Some((i, 'M' | 'm')) => (&t[..i], 1024 * 1024),
        _ => (t, 1),
    };
    digits
        .parse::<u64>()
        .ok()
        .and_then(|v| v.checked_mul(mul))
        .ok_or_else(|| CliError::Config(format!("sweep value `{s}` is not a non-negative integer")))
}

impl SweepAxis {
    fn check(self, v: u64, base: &HierarchyConfig) -> Result<(), String> {
        let (lo, hi) = match self {
            SweepAxis::K => (0, MAX_K as u64),
            SweepAxis::ThresholdFixed => (0, MISS_COST_MAX as u64),
            SweepAxis::PairTableEntries => (2, 1 << 30),
            SweepAxis::LlcCapacity => (base.llc_capacity / 2, base.llc_capacity * 2),
            SweepAxis::LlcAssociativity => (6, 48),
        };
        if v < lo || v > hi {
            return Err(format!("{self} value {v} is outside {lo}..={hi}"));
        }
        if self == SweepAxis::PairTableEntries && !v.is_power_of_two() {
            return Err(format!("pair_table_entries value {v} is not a power of two"));
        }
        Ok(())
    }

    /// The layer-enabled configuration for one point.
    fn point(self, v: u64, hierarchy: &HierarchyConfig, policy: &pairllc::PolicySpec, g: &GaribaldiConfig) -> SimConfig {
        let mut h = hierarchy.clone();
        let mut g = GaribaldiConfig { enabled: true, ..g.clone() };
        match self {
            SweepAxis::K => g.k = v as usize,
            SweepAxis::ThresholdFixed => g.threshold_fixed = Some(v as u8),
            SweepAxis::PairTableEntries => g.pair_table_entries = v as usize,
            SweepAxis::LlcCapacity => h.llc_capacity = v,
            SweepAxis::LlcAssociativity => h.llc_associativity = v as usize,
        }
        SimConfig::new(h, policy.clone(), Some(g))
    }
}

/// Parses, range-checks and orders sweep values.
pub fn parse_values(axis: SweepAxis, raw: &[String], base: &HierarchyConfig) -> Result<Vec<u64>, CliError> {
    if raw.is_empty() {
        return Err(CliError::Config(format!("sweep over {axis} needs at least one value")));
    }
    let mut vals = raw.iter().map(|s| parse_value(s)).collect::<Result<Vec<_>, _>>()?;
    for &v in &vals {
        axis.check(v, base).map_err(CliError::Config)?;
    }
    vals.sort_unstable();
    if let Some(w) = vals.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Config(format!("sweep value {} appears twice", w[0])));
    }
    Ok(vals)
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: u64,
    pub report: SimReport,
    /// The bare policy on the same hierarchy.
    pub baseline: SimReport,
}

impl SweepRow {
    /// `1 - with / without` for stall cycles.
    pub fn stall_reduction(&self) -> Option<f64> {
        reduction(self.report.stall.total_cycles, self.baseline.stall.total_cycles)
    }

    pub fn i_miss_reduction(&self) -> Option<f64> {
        reduction(self.report.hierarchy.instruction.llc_misses, self.baseline.hierarchy.instruction.llc_misses)
    }

    pub fn csv_header() -> String {
        format!(
            "axis,value,{},baseline_stall_total,baseline_i_llc_misses,stall_reduction,i_miss_reduction",
            SimReport::csv_header()
        )
    }

    pub fn csv_row(&self) -> String {
        let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.axis,
            self.value,
            self.report.csv_row(),
            self.baseline.stall.total_cycles,
            self.baseline.hierarchy.instruction.llc_misses,
            f(self.stall_reduction()),
            f(self.i_miss_reduction())
        )
    }
}

fn reduction(with: u64, without: u64) -> Option<f64> {
    (without > 0).then(|| 1.0 - with as f64 / without as f64)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = SweepRow::csv_header();
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Runs every point of a sweep plus the bare-policy baseline of each
/// distinct hierarchy. `parallel` > 1 spreads the independent simulations
/// over that many threads; rows come back in value order either way.
pub fn run_sweep(
    trace: &[MemoryAccess],
    cfg: &RunConfig,
    axis: SweepAxis,
    values: &[u64],
    parallel: usize,
) -> Result<Vec<SweepRow>, CliError> {
    let g = cfg.garibaldi.clone().unwrap_or_default();
    let points: Vec<SimConfig> = values.iter().map(|&v| axis.point(v, &cfg.hierarchy, &cfg.policy, &g)).collect();
    let mut baselines: Vec<SimConfig> = Vec::new();
    for p in &points {
        let b = SimConfig::bare(p.hierarchy.clone(), cfg.policy.clone());
        if !baselines.contains(&b) {
            baselines.push(b);
        }
    }
    let jobs: Vec<&SimConfig> = points.iter().chain(&baselines).collect();
    let run = |c: &&SimConfig| simulate(trace, c).map(|r| r.report);
    let reports: Vec<Result<SimReport, SimError>> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {parallel} worker threads: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    let mut reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    let base_reports = reports.split_off(points.len());
    Ok(values
        .iter()
        .zip(points.iter().zip(reports))
        .map(|(&value, (p, report))| {
            let i = baselines.iter().position(|b| b.hierarchy == p.hierarchy).expect("baseline exists");
            SweepRow { axis, value, report, baseline: base_reports[i].clone() }
        })
        .collect())
}

/// Sweeps one axis and writes `sweep_<axis>.csv`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    axis: SweepAxis,
    raw_values: &[String],
    parallel: usize,
) -> Result<(Vec<SweepRow>, PathBuf), CliError> {
    let values = parse_values(axis, raw_values, &cfg.hierarchy)?;
    let trace = cfg.load_trace()?;
    let rows = run_sweep(&trace, cfg, axis, &values, parallel)?;
    let path = out_dir(cfg)?.join(format!("sweep_{axis}.csv"));
    write_file(&path, sweep_csv(&rows).as_bytes())?;
    Ok((rows, path))
}
