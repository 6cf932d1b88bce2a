//! Run reports and the analyses behind them.

mod conditional;
pub mod offline;
mod reuse;

use std::collections::HashSet;

use serde::Serialize;

pub use conditional::{ConditionalRates, ConditionalTracker};
pub use offline::{analyze_events, analyze_trace, Analysis, AnalysisKind, BeladySummary};
pub use reuse::{ReuseClassSummary, ReuseProfiler, ReuseSummary};

use crate::cache::{HierarchyStats, StallEstimate};
use crate::garibaldi::GaribaldiStats;
use crate::trace::MemoryAccess;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Access counts and distinct lines per class.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AccessProfile {
    pub instruction_accesses: u64,
    pub data_accesses: u64,
    pub instruction_lines: u64,
    pub data_lines: u64,
    pub accesses_per_instruction_line: Option<f64>,
    pub accesses_per_data_line: Option<f64>,
    pub instruction_ratio: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct AccessProfiler {
    counts: [u64; 2],
    lines: [HashSet<u64>; 2],
}

impl AccessProfiler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, line: u64, is_instruction: bool) {
        let c = usize::from(is_instruction);
        self.counts[c] += 1;
        self.lines[c].insert(line);
    }

    pub fn profile(&self) -> AccessProfile {
        let [d, i] = self.counts;
        let (dl, il) = (self.lines[0].len() as u64, self.lines[1].len() as u64);
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        AccessProfile {
            instruction_accesses: i,
            data_accesses: d,
            instruction_lines: il,
            data_lines: dl,
            accesses_per_instruction_line: ratio(i, il),
            accesses_per_data_line: ratio(d, dl),
            instruction_ratio: ratio(i, i + d),
        }
    }
}

/// Profile of a raw trace, before any cache filtering.
pub fn profile_trace(trace: &[MemoryAccess]) -> AccessProfile {
    let mut p = AccessProfiler::new();
    for a in trace {
        p.record(a.line(), a.is_instruction());
    }
    p.profile()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GaribaldiReport {
    pub stats: GaribaldiStats,
    pub final_threshold: u8,
    pub final_color: u8,
    pub valid_pair_entries: u64,
    pub threshold_trajectory: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimReport {
    pub schema_version: u32,
    pub config_digest: String,
    pub policy: String,
    pub garibaldi_enabled: bool,
    pub trace_records: u64,
    pub cores: u32,
    pub hierarchy: HierarchyStats,
    /// Over accesses that reached the LLC.
    pub llc_profile: AccessProfile,
    pub conditional: ConditionalRates,
    pub reuse: ReuseSummary,
    pub stall: StallEstimate,
    pub garibaldi: Option<GaribaldiReport>,
}

/// CSV layout version; bump when `CSV_COLUMNS` changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: &[&str] = &[
    "config_digest",
    "policy",
    "garibaldi_enabled",
    "trace_records",
    "i_accesses",
    "i_private_hits",
    "i_llc_hits",
    "i_llc_misses",
    "d_accesses",
    "d_private_hits",
    "d_llc_hits",
    "d_llc_misses",
    "i_llc_miss_rate",
    "d_llc_miss_rate",
    "forced_hits",
    "writebacks_to_memory",
    "qbs_queries",
    "protections_granted",
    "prefetches_issued",
    "prefetches_useful",
    "i_miss_given_d_hit",
    "i_miss_given_d_miss",
    "stall_total",
    "stall_ifetch",
    "stall_data",
    "makespan",
    "final_threshold",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl SimReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_values(&self) -> Vec<String> {
        let h = &self.hierarchy;
        let (i, d) = (&h.instruction, &h.data);
        let v = vec![
            self.config_digest.clone(),
            self.policy.clone(),
            self.garibaldi_enabled.to_string(),
            self.trace_records.to_string(),
            i.accesses.to_string(),
            i.private_hits.to_string(),
            i.llc_hits.to_string(),
            i.llc_misses.to_string(),
            d.accesses.to_string(),
            d.private_hits.to_string(),
            d.llc_hits.to_string(),
            d.llc_misses.to_string(),
            opt(i.llc_miss_rate()),
            opt(d.llc_miss_rate()),
            h.forced_hits.to_string(),
            h.writebacks_to_memory.to_string(),
            h.qbs_queries.to_string(),
            h.protections_granted.to_string(),
            h.prefetches_issued.to_string(),
            h.prefetches_useful.to_string(),
            opt(self.conditional.rate_given_data_hit),
            opt(self.conditional.rate_given_data_miss),
            self.stall.total_cycles.to_string(),
            self.stall.ifetch_cycles.to_string(),
            self.stall.data_cycles.to_string(),
            self.stall.makespan_cycles.to_string(),
            self.garibaldi.as_ref().map(|g| g.final_threshold.to_string()).unwrap_or_default(),
        ];
        debug_assert_eq!(v.len(), CSV_COLUMNS.len());
        v
    }

    pub fn csv_row(&self) -> String {
        self.csv_values().join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_matches_registry() {
        let r = SimReport::default();
        assert_eq!(r.csv_values().len(), CSV_COLUMNS.len());
        assert_eq!(SimReport::csv_header().split(',').count(), CSV_COLUMNS.len());
    }

    #[test]
    fn profile_counts_lines_per_class() {
        let mut p = AccessProfiler::new();
        for (l, i) in [(1, true), (1, true), (2, false), (2, false), (3, false), (2, false)] {
            p.record(l, i);
        }
        let a = p.profile();
        assert_eq!((a.instruction_lines, a.data_lines), (1, 2));
        assert_eq!(a.accesses_per_instruction_line, Some(2.0));
        assert_eq!(a.accesses_per_data_line, Some(2.0));
        assert_eq!(a.instruction_ratio, Some(2.0 / 6.0));
        assert_eq!(AccessProfiler::new().profile().instruction_ratio, None);
    }
}
