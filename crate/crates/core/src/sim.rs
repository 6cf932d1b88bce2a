//! One deterministic simulation: trace in, report out.

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cache::{Event, Hierarchy, HierarchyConfig, LevelHit, PrivateCache, StallEstimator, StallEvent};
use crate::garibaldi::{Garibaldi, GaribaldiConfig};
use crate::metrics::{
    AccessProfiler, ConditionalTracker, GaribaldiReport, ReuseProfiler, SimReport, REPORT_SCHEMA_VERSION,
};
use crate::replacement::{FutureIndex, PolicySpec};
use crate::trace::MemoryAccess;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Everything that determines a run's result besides the trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub hierarchy: HierarchyConfig,
    pub policy: PolicySpec,
    /// `None` runs the bare policy.
    pub garibaldi: Option<GaribaldiConfig>,
}

impl SimConfig {
    pub fn new(hierarchy: HierarchyConfig, policy: PolicySpec, garibaldi: Option<GaribaldiConfig>) -> Self {
        SimConfig { hierarchy, policy, garibaldi: garibaldi.filter(|g| g.enabled) }
    }

    pub fn bare(hierarchy: HierarchyConfig, policy: PolicySpec) -> Self {
        SimConfig::new(hierarchy, policy, None)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.hierarchy.private_geometry().map_err(|e| SimError::Config(format!("hierarchy.private: {e}")))?;
        self.hierarchy.llc_geometry().map_err(|e| SimError::Config(format!("hierarchy.llc: {e}")))?;
        if let Some(g) = &self.garibaldi {
            g.validate().map_err(SimError::Config)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = SimConfig::new(self.hierarchy.clone(), self.policy.clone(), self.garibaldi.clone());
        hex::encode(Sha256::digest(serde_json::to_vec(&canonical).expect("config serializes")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub record_events: bool,
    pub dump_pair_table: bool,
}

#[derive(Debug)]
pub struct SimRun {
    pub report: SimReport,
    pub events: Option<Vec<Event>>,
    pub pair_table: Option<String>,
}

/// Line addresses of the demand accesses that miss the private caches, in
/// order. The private caches never see LLC state, so this stream does not
/// depend on the LLC policy.
pub fn llc_demand_stream(trace: &[MemoryAccess], hierarchy: &HierarchyConfig) -> Result<Vec<u64>, SimError> {
    Ok(llc_demand_accesses(trace, hierarchy)?.into_iter().map(|(line, _)| line).collect())
}

/// As [`llc_demand_stream`], paired with each access's instruction flag.
pub fn llc_demand_accesses(
    trace: &[MemoryAccess],
    hierarchy: &HierarchyConfig,
) -> Result<Vec<(u64, bool)>, SimError> {
    let geom = hierarchy.private_geometry().map_err(|e| SimError::Config(format!("hierarchy.private: {e}")))?;
    let mut privates: Vec<PrivateCache> = Vec::new();
    let mut out = Vec::new();
    for acc in trace {
        let core = acc.core as usize;
        while privates.len() <= core {
            privates.push(PrivateCache::new(geom));
        }
        let line = acc.line();
        let is_store = acc.kind == crate::trace::AccessKind::Store;
        if !privates[core].access(line, is_store) {
            privates[core].fill(line, is_store);
            out.push((line, acc.is_instruction()));
        }
    }
    Ok(out)
}

pub fn simulate(trace: &[MemoryAccess], cfg: &SimConfig) -> Result<SimRun, SimError> {
    simulate_with(trace, cfg, SimOptions::default())
}

pub fn simulate_with(trace: &[MemoryAccess], cfg: &SimConfig, opts: SimOptions) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let llc_geom = cfg.hierarchy.llc_geometry().map_err(|e| SimError::Config(e.to_string()))?;
    let future = if cfg.policy.needs_future() {
        Some(FutureIndex::from_lines(llc_demand_stream(trace, &cfg.hierarchy)?))
    } else {
        None
    };
    let policy = cfg.policy.build(llc_geom, future);
    let garibaldi = match cfg.garibaldi.as_ref().filter(|g| g.enabled) {
        Some(g) => Some(Garibaldi::new(g.clone()).map_err(SimError::Config)?),
        None => None,
    };
    let mut h = Hierarchy::new(cfg.hierarchy.clone(), policy, garibaldi)
        .map_err(|e| SimError::Config(e.to_string()))?;
    h.record_events(opts.record_events);

    let mut stall = StallEstimator::new();
    let mut reuse = ReuseProfiler::new(llc_geom);
    let mut profile = AccessProfiler::new();
    let mut cond = ConditionalTracker::new();
    let mut cores = 0u32;
    for acc in trace {
        cores = cores.max(acc.core as u32 + 1);
        let is_instruction = acc.is_instruction();
        let out = h.access(acc);
        stall.record(StallEvent { core: acc.core, is_instruction, latency: out.latency_cycles });
        if out.level_hit == LevelHit::Private {
            continue;
        }
        let line = acc.line();
        let hit = out.level_hit == LevelHit::Llc;
        reuse.record(line, is_instruction);
        profile.record(line, is_instruction);
        if is_instruction {
            cond.on_ifetch(acc.core, line, hit);
        } else {
            cond.on_data(acc.core, out.paired_il, hit);
        }
    }

    if let Some(v) = h.violation() {
        return Err(SimError::Invariant(v.to_string()));
    }
    let stats = h.stats().clone();
    for (name, c) in [("instruction", &stats.instruction), ("data", &stats.data)] {
        if c.accesses != c.private_hits + c.llc_hits + c.llc_misses {
            return Err(SimError::Invariant(format!("{name} accesses do not add up: {c:?}")));
        }
    }
    if stats.prefetches_useful > stats.prefetches_issued {
        return Err(SimError::Invariant("more useful prefetches than issued".into()));
    }
    if stats.protections_granted > stats.qbs_queries {
        return Err(SimError::Invariant("more protections than queries".into()));
    }

    let garibaldi_report = h.garibaldi().map(|g| GaribaldiReport {
        stats: g.stats().clone(),
        final_threshold: g.threshold(),
        final_color: g.current_color(),
        valid_pair_entries: g.pair_table().iter_valid().count() as u64,
        threshold_trajectory: g.color_state().trajectory().to_vec(),
    });
    let pair_table = if opts.dump_pair_table { h.garibaldi().map(|g| g.dump_pair_table()) } else { None };
    let report = SimReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config_digest: cfg.digest(),
        policy: cfg.policy.to_string(),
        garibaldi_enabled: garibaldi_report.is_some(),
        trace_records: trace.len() as u64,
        cores,
        hierarchy: stats,
        llc_profile: profile.profile(),
        conditional: cond.rates(),
        reuse: reuse.summary(),
        stall: stall.finish(),
        garibaldi: garibaldi_report,
    };
    Ok(SimRun { report, events: h.take_events(), pair_table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::AccessKind;

    #[test]
    fn empty_trace_gives_zero_report() {
        let cfg = SimConfig::bare(HierarchyConfig::default(), PolicySpec::Lru);
        let r = simulate(&[], &cfg).unwrap().report;
        assert_eq!(r.trace_records, 0);
        assert_eq!(r.stall.total_cycles, 0);
        assert_eq!(r.hierarchy.instruction.accesses + r.hierarchy.data.accesses, 0);
        assert_eq!(r.conditional.rate_given_data_hit, None);
    }

    #[test]
    fn disabled_layer_normalizes_away() {
        let off = GaribaldiConfig { enabled: false, ..GaribaldiConfig::default() };
        let a = SimConfig::new(HierarchyConfig::default(), PolicySpec::Lru, Some(off));
        let b = SimConfig::bare(HierarchyConfig::default(), PolicySpec::Lru);
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn belady_runs_with_prepass() {
        let hier = HierarchyConfig {
            private_capacity: 2 * 64,
            private_associativity: 2,
            llc_capacity: 4 * 2 * 64,
            llc_associativity: 2,
            ..HierarchyConfig::default()
        };
        let trace: Vec<MemoryAccess> = (0..2000u64)
            .map(|i| {
                let l = (i * 31 + i / 7) % 41;
                MemoryAccess { seq: i, core: (i % 3) as u8, kind: AccessKind::Load, pc: 0x40, paddr: l << 6 }
            })
            .collect();
        let opt = simulate(&trace, &SimConfig::bare(hier.clone(), PolicySpec::Belady)).unwrap().report;
        let lru = simulate(&trace, &SimConfig::bare(hier, PolicySpec::Lru)).unwrap().report;
        assert!(opt.hierarchy.data.llc_misses <= lru.hierarchy.data.llc_misses);
        assert_eq!(opt.hierarchy.data.accesses, lru.hierarchy.data.accesses);
    }
}
