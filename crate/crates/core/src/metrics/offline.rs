//! Offline analyses over a trace file or a recorded event log.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{profile_trace, AccessProfile, AccessProfiler, ConditionalRates, ConditionalTracker, ReuseProfiler, ReuseSummary};
use crate::cache::{estimate_stalls, CacheGeometry, Event, LevelHit, StallEstimate, StallEvent};
use crate::replacement::{belady_annotate, FillDecision};
use crate::sim::{llc_demand_accesses, simulate, SimConfig, SimError};
use crate::trace::MemoryAccess;

pub const ANALYSIS_NAMES: &str = "profile | reuse | conditional | belady | stall";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AnalysisKind {
    Profile,
    Reuse,
    Conditional,
    Belady,
    Stall,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 5] =
        [AnalysisKind::Profile, AnalysisKind::Reuse, AnalysisKind::Conditional, AnalysisKind::Belady, AnalysisKind::Stall];
}

impl FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "profile" => AnalysisKind::Profile,
            "reuse" => AnalysisKind::Reuse,
            "conditional" => AnalysisKind::Conditional,
            "belady" => AnalysisKind::Belady,
            "stall" => AnalysisKind::Stall,
            _ => return Err(format!("unknown analysis `{s}`; expected one of: {ANALYSIS_NAMES}")),
        })
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalysisKind::Profile => "profile",
            AnalysisKind::Reuse => "reuse",
            AnalysisKind::Conditional => "conditional",
            AnalysisKind::Belady => "belady",
            AnalysisKind::Stall => "stall",
        })
    }
}

/// Optimal (MIN) labeling of an LLC-bound stream.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BeladySummary {
    pub llc_accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub bypasses: u64,
    pub instruction_misses: u64,
    pub data_misses: u64,
    pub miss_rate: Option<f64>,
}

impl BeladySummary {
    pub fn of(stream: &[(u64, bool)], geom: CacheGeometry) -> Self {
        let lines: Vec<u64> = stream.iter().map(|&(l, _)| l).collect();
        let ann = belady_annotate(&lines, geom);
        let mut s = BeladySummary { llc_accesses: lines.len() as u64, ..Self::default() };
        for (d, &(_, is_instruction)) in ann.decisions.iter().zip(stream) {
            if d.is_hit() {
                s.hits += 1;
                continue;
            }
            s.misses += 1;
            s.bypasses += u64::from(*d == FillDecision::Bypass);
            if is_instruction {
                s.instruction_misses += 1;
            } else {
                s.data_misses += 1;
            }
        }
        s.miss_rate = (s.llc_accesses > 0).then(|| s.misses as f64 / s.llc_accesses as f64);
        s
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Analysis {
    /// `trace` or `events`.
    pub source: String,
    pub records: u64,
    /// Digest of the configuration that shaped LLC-level results.
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<AccessProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llc_profile: Option<AccessProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reuse: Option<ReuseSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional: Option<ConditionalRates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub belady: Option<BeladySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stall: Option<StallEstimate>,
}

impl Analysis {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("analysis serializes");
        s.push('\n');
        s
    }
}

fn reuse_of(stream: &[(u64, bool)], geom: CacheGeometry) -> ReuseSummary {
    let mut r = ReuseProfiler::new(geom);
    for &(line, is_instruction) in stream {
        r.record(line, is_instruction);
    }
    r.summary()
}

fn profile_of(stream: &[(u64, bool)]) -> AccessProfile {
    let mut p = AccessProfiler::new();
    for &(line, is_instruction) in stream {
        p.record(line, is_instruction);
    }
    p.profile()
}

/// Analyses of a raw trace. Hit/miss-dependent results (conditional rates,
/// stalls) come from simulating it under `cfg`.
pub fn analyze_trace(trace: &[MemoryAccess], cfg: &SimConfig, kinds: &[AnalysisKind]) -> Result<Analysis, SimError> {
    cfg.validate()?;
    let geom = cfg.hierarchy.llc_geometry().map_err(|e| SimError::Config(e.to_string()))?;
    let wants = |k| kinds.contains(&k);
    let mut a = Analysis {
        source: "trace".into(),
        records: trace.len() as u64,
        config_digest: cfg.digest(),
        ..Analysis::default()
    };
    let stream = llc_demand_accesses(trace, &cfg.hierarchy)?;
    if wants(AnalysisKind::Profile) {
        a.profile = Some(profile_trace(trace));
        a.llc_profile = Some(profile_of(&stream));
    }
    if wants(AnalysisKind::Reuse) {
        a.reuse = Some(reuse_of(&stream, geom));
    }
    if wants(AnalysisKind::Belady) {
        a.belady = Some(BeladySummary::of(&stream, geom));
    }
    if wants(AnalysisKind::Conditional) || wants(AnalysisKind::Stall) {
        let r = simulate(trace, cfg)?.report;
        if wants(AnalysisKind::Conditional) {
            a.conditional = Some(r.conditional);
        }
        if wants(AnalysisKind::Stall) {
            a.stall = Some(r.stall);
        }
    }
    Ok(a)
}

/// Analyses of a recorded event log. `geom` is the LLC geometry of the run
/// that produced it.
pub fn analyze_events(events: &[Event], geom: CacheGeometry, config_digest: &str, kinds: &[AnalysisKind]) -> Analysis {
    let wants = |k| kinds.contains(&k);
    let mut a = Analysis {
        source: "events".into(),
        records: events.len() as u64,
        config_digest: config_digest.to_string(),
        ..Analysis::default()
    };
    let llc: Vec<&Event> = events.iter().filter(|e| e.level_hit != LevelHit::Private).collect();
    let stream: Vec<(u64, bool)> = llc.iter().map(|e| (e.line, e.kind.is_instruction())).collect();
    if wants(AnalysisKind::Profile) {
        let all: Vec<(u64, bool)> = events.iter().map(|e| (e.line, e.kind.is_instruction())).collect();
        a.profile = Some(profile_of(&all));
        a.llc_profile = Some(profile_of(&stream));
    }
    if wants(AnalysisKind::Reuse) {
        a.reuse = Some(reuse_of(&stream, geom));
    }
    if wants(AnalysisKind::Belady) {
        a.belady = Some(BeladySummary::of(&stream, geom));
    }
    if wants(AnalysisKind::Conditional) {
        let mut t = ConditionalTracker::new();
        for e in &llc {
            let hit = e.level_hit == LevelHit::Llc;
            if e.kind.is_instruction() {
                t.on_ifetch(e.core, e.line, hit);
            } else {
                t.on_data(e.core, e.paired_il, hit);
            }
        }
        a.conditional = Some(t.rates());
    }
    if wants(AnalysisKind::Stall) {
        let evs: Vec<StallEvent> = events
            .iter()
            .map(|e| StallEvent { core: e.core, is_instruction: e.kind.is_instruction(), latency: e.latency })
            .collect();
        a.stall = Some(estimate_stalls(&evs).0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_with, SimOptions};
    use crate::trace::{generate_many_to_few, TraceGenConfig};
    use crate::{HierarchyConfig, PolicySpec};

    #[test]
    fn event_log_reproduces_the_run() {
        let trace = generate_many_to_few(&TraceGenConfig { steps_per_core: 3000, ..TraceGenConfig::many_to_few_default() })
            .unwrap();
        let cfg = SimConfig::bare(HierarchyConfig::default(), PolicySpec::Lru);
        let run = simulate_with(&trace, &cfg, SimOptions { record_events: true, dump_pair_table: false }).unwrap();
        let events = run.events.unwrap();
        let geom = cfg.hierarchy.llc_geometry().unwrap();
        let from_events = analyze_events(&events, geom, &cfg.digest(), &AnalysisKind::ALL);
        let from_trace = analyze_trace(&trace, &cfg, &AnalysisKind::ALL).unwrap();
        assert_eq!(from_events.conditional.as_ref(), Some(&run.report.conditional));
        assert_eq!(from_events.stall.as_ref(), Some(&run.report.stall));
        assert_eq!(from_events.reuse, from_trace.reuse);
        assert_eq!(from_events.belady, from_trace.belady);
        assert_eq!(from_events.llc_profile, from_trace.llc_profile);
        assert_eq!(from_trace.stall.as_ref(), Some(&run.report.stall));
    }

    #[test]
    fn belady_summary_counts_classes() {
        let geom = CacheGeometry::new(2 * 64, 2).unwrap();
        let s = BeladySummary::of(&[(1, true), (2, false), (3, false), (1, true), (2, false)], geom);
        assert_eq!((s.hits, s.misses, s.bypasses, s.instruction_misses, s.data_misses), (2, 3, 1, 1, 2));
        assert_eq!(BeladySummary::of(&[], geom).miss_rate, None);
    }

    #[test]
    fn names_parse() {
        for k in AnalysisKind::ALL {
            assert_eq!(k.to_string().parse::<AnalysisKind>().unwrap(), k);
        }
        assert!("nope".parse::<AnalysisKind>().unwrap_err().contains(ANALYSIS_NAMES));
    }
}
