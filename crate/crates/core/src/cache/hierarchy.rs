use serde::{Deserialize, Serialize};

use super::events::Event;
use super::private::PrivateCache;
use super::{AccessOutcome, CacheGeometry, GeometryError, LevelHit};
use crate::garibaldi::{Garibaldi, HelperTables};
use crate::replacement::{ReplacementPolicy, Request, WayView};
use crate::trace::{AccessKind, MemoryAccess};
use crate::LINE_SHIFT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Latencies {
    pub private: u64,
    pub llc: u64,
    pub memory: u64,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies { private: 3, llc: 40, memory: 147 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub private_capacity: u64,
    pub private_associativity: usize,
    pub llc_capacity: u64,
    pub llc_associativity: usize,
    pub latencies: Latencies,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            private_capacity: 128 * 1024,
            private_associativity: 8,
            llc_capacity: 1536 * 1024,
            llc_associativity: 12,
            latencies: Latencies::default(),
        }
    }
}

impl HierarchyConfig {
    pub fn private_geometry(&self) -> Result<CacheGeometry, GeometryError> {
        CacheGeometry::new(self.private_capacity, self.private_associativity)
    }

    pub fn llc_geometry(&self) -> Result<CacheGeometry, GeometryError> {
        CacheGeometry::new(self.llc_capacity, self.llc_associativity)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassStats {
    pub accesses: u64,
    pub private_hits: u64,
    pub llc_hits: u64,
    pub llc_misses: u64,
}

impl ClassStats {
    pub fn llc_accesses(&self) -> u64 {
        self.llc_hits + self.llc_misses
    }

    pub fn llc_miss_rate(&self) -> Option<f64> {
        let n = self.llc_accesses();
        (n > 0).then(|| self.llc_misses as f64 / n as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct HierarchyStats {
    pub instruction: ClassStats,
    pub data: ClassStats,
    pub forced_hits: u64,
    pub llc_bypasses: u64,
    pub llc_evictions_instruction: u64,
    pub llc_evictions_data: u64,
    pub writebacks_to_llc: u64,
    pub writebacks_to_memory: u64,
    pub qbs_queries: u64,
    pub protections_granted: u64,
    pub protections_denied: u64,
    pub qbs_cycles: u64,
    pub prefetches_issued: u64,
    pub prefetches_useful: u64,
    pub prefetches_redundant: u64,
    pub prefetches_as_instruction: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct LlcLine {
    valid: bool,
    line: u64,
    dirty: bool,
    is_instruction: bool,
    is_prefetched: bool,
}

/// Private per-core caches in front of one shared, non-inclusive LLC.
pub struct Hierarchy {
    cfg: HierarchyConfig,
    private_geom: CacheGeometry,
    llc_geom: CacheGeometry,
    privates: Vec<PrivateCache>,
    llc: Vec<LlcLine>,
    policy: Box<dyn ReplacementPolicy>,
    garibaldi: Option<Garibaldi>,
    shadow: HelperTables,
    stats: HierarchyStats,
    events: Option<Vec<Event>>,
    violation: Option<String>,
}

struct Install {
    evicted: Option<(u64, bool)>,
    qbs_cycles: u64,
    queries: u32,
    protections: u32,
    installed: bool,
}

impl Hierarchy {
    pub fn new(
        cfg: HierarchyConfig,
        policy: Box<dyn ReplacementPolicy>,
        garibaldi: Option<Garibaldi>,
    ) -> Result<Self, GeometryError> {
        let private_geom = cfg.private_geometry()?;
        let llc_geom = cfg.llc_geometry()?;
        let (helper_entries, helper_ways) = garibaldi
            .as_ref()
            .map(|g| (g.config().helper_entries, g.config().helper_ways))
            .unwrap_or((128, 4));
        Ok(Hierarchy {
            private_geom,
            llc_geom,
            privates: Vec::new(),
            llc: vec![LlcLine::default(); llc_geom.n_sets() * llc_geom.associativity],
            policy,
            garibaldi,
            shadow: HelperTables::new(helper_entries, helper_ways),
            stats: HierarchyStats::default(),
            events: None,
            violation: None,
            cfg,
        })
    }

    pub fn record_events(&mut self, on: bool) {
        self.events = on.then(Vec::new);
    }

    pub fn take_events(&mut self) -> Option<Vec<Event>> {
        self.events.take()
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.cfg
    }

    pub fn llc_geometry(&self) -> CacheGeometry {
        self.llc_geom
    }

    pub fn stats(&self) -> &HierarchyStats {
        &self.stats
    }

    pub fn garibaldi(&self) -> Option<&Garibaldi> {
        self.garibaldi.as_ref()
    }

    pub fn policy_name(&self) -> String {
        self.policy.name()
    }

    /// First internal invariant broken during the run, if any.
    pub fn violation(&self) -> Option<&str> {
        self.violation.as_deref()
    }

    pub fn llc_contains(&self, line: u64) -> bool {
        self.llc_way(line).is_some()
    }

    /// Instruction indicator of a resident LLC line.
    pub fn llc_is_instruction(&self, line: u64) -> Option<bool> {
        self.llc_way(line).map(|i| self.llc[i].is_instruction)
    }

    fn llc_way(&self, line: u64) -> Option<usize> {
        let a = self.llc_geom.associativity;
        let base = self.llc_geom.set_of(line) * a;
        (base..base + a).find(|&i| self.llc[i].valid && self.llc[i].line == line)
    }

    fn private(&mut self, core: u8) -> &mut PrivateCache {
        let core = core as usize;
        while self.privates.len() <= core {
            self.privates.push(PrivateCache::new(self.private_geom));
        }
        &mut self.privates[core]
    }

    pub fn access(&mut self, acc: &MemoryAccess) -> AccessOutcome {
        let line = acc.line();
        let is_instruction = acc.is_instruction();
        let is_store = acc.kind == AccessKind::Store;
        let lat = self.cfg.latencies;
        self.class(is_instruction).accesses += 1;
        let out = if self.private(acc.core).access(line, is_store) {
            self.class(is_instruction).private_hits += 1;
            AccessOutcome {
                level_hit: LevelHit::Private,
                latency_cycles: lat.private,
                evicted: None,
                prefetches_issued: Vec::new(),
                paired_il: None,
                qbs_queries: 0,
                protections: 0,
            }
        } else {
            let out = self.llc_access(acc, line);
            if let Some((victim, true)) = self.private(acc.core).fill(line, is_store) {
                self.writeback(victim);
            }
            out
        };
        if let Some(events) = &mut self.events {
            events.push(Event {
                seq: acc.seq,
                core: acc.core,
                kind: acc.kind,
                level_hit: out.level_hit,
                latency: out.latency_cycles,
                line,
                victim: out.evicted,
                paired_il: out.paired_il,
            });
        }
        out
    }

    fn class(&mut self, is_instruction: bool) -> &mut crate::cache::ClassStats {
        if is_instruction {
            &mut self.stats.instruction
        } else {
            &mut self.stats.data
        }
    }

    fn llc_access(&mut self, acc: &MemoryAccess, line: u64) -> AccessOutcome {
        let lat = self.cfg.latencies;
        let is_instruction = acc.is_instruction();
        let set = self.llc_geom.set_of(line);
        let req = Request { core: acc.core, pc: acc.pc, line, is_instruction, is_prefetch: false };
        let way = self.llc_way(line);
        let forced = way.is_none() && self.policy.force_hit(&req);
        let hit = way.is_some() || forced;
        self.policy.on_access(set, &req, hit);

        let paired_il = if is_instruction {
            self.shadow.record_ifetch(acc.core, acc.pc, line << LINE_SHIFT);
            None
        } else {
            self.shadow.deduce_il_pa(acc.core, acc.pc).map(|a| a >> LINE_SHIFT)
        };

        let mut out = AccessOutcome {
            level_hit: LevelHit::Llc,
            latency_cycles: lat.private + lat.llc,
            evicted: None,
            prefetches_issued: Vec::new(),
            paired_il,
            qbs_queries: 0,
            protections: 0,
        };
        if let Some(i) = way {
            self.policy.on_hit(set, i % self.llc_geom.associativity, &req);
            let l = &mut self.llc[i];
            if l.is_prefetched {
                l.is_prefetched = false;
                self.stats.prefetches_useful += 1;
            }
            self.class(is_instruction).llc_hits += 1;
        } else if forced {
            self.stats.forced_hits += 1;
            self.class(is_instruction).llc_hits += 1;
        } else {
            self.class(is_instruction).llc_misses += 1;
            out.level_hit = LevelHit::Memory;
            out.latency_cycles += lat.memory;
            let ins = self.install(set, &req, false);
            out.evicted = ins.evicted;
            out.latency_cycles += ins.qbs_cycles;
            out.qbs_queries = ins.queries;
            out.protections = ins.protections;
        }

        let prefetch_lines = match &mut self.garibaldi {
            Some(g) => {
                let lines = if is_instruction {
                    g.on_llc_ifetch(acc.core, acc.pc, line, hit)
                } else {
                    g.on_llc_data_access(acc.core, acc.pc, acc.paddr, hit);
                    Vec::new()
                };
                g.color_tick(acc.core, is_instruction, acc.pc, hit);
                lines
            }
            None => Vec::new(),
        };
        for pl in prefetch_lines {
            if self.prefetch(acc, pl) {
                out.prefetches_issued.push(pl << LINE_SHIFT);
            }
        }
        out
    }

    fn prefetch(&mut self, acc: &MemoryAccess, line: u64) -> bool {
        if self.llc_way(line).is_some() {
            self.stats.prefetches_redundant += 1;
            return false;
        }
        let is_instruction = self.garibaldi.as_ref().is_some_and(|g| g.is_tracked_il(line));
        let req = Request { core: acc.core, pc: acc.pc, line, is_instruction, is_prefetch: true };
        self.stats.prefetches_issued += 1;
        self.stats.prefetches_as_instruction += u64::from(is_instruction);
        self.install(self.llc_geom.set_of(line), &req, true);
        true
    }

    fn install(&mut self, set: usize, req: &Request, is_prefetch: bool) -> Install {
        let assoc = self.llc_geom.associativity;
        let base = set * assoc;
        let mut ins = Install { evicted: None, qbs_cycles: 0, queries: 0, protections: 0, installed: false };
        let way = match (0..assoc).find(|&w| !self.llc[base + w].valid) {
            Some(w) => w,
            None => {
                let views: Vec<WayView> = self.llc[base..base + assoc]
                    .iter()
                    .map(|l| WayView { line: l.line, is_instruction: l.is_instruction })
                    .collect();
                if self.policy.bypass(set, req, &views) {
                    self.stats.llc_bypasses += 1;
                    return ins;
                }
                let mut order = self.policy.victim_order(set, req, &views);
                if !is_permutation(&order, assoc) {
                    self.violation.get_or_insert_with(|| {
                        format!("policy {} returned an invalid victim order {order:?}", self.policy.name())
                    });
                    order = (0..assoc).collect();
                }
                let w = self.select_victim(set, &order, &views, &mut ins);
                let victim = self.llc[base + w];
                if victim.dirty {
                    self.stats.writebacks_to_memory += 1;
                }
                if victim.is_instruction {
                    self.stats.llc_evictions_instruction += 1;
                } else {
                    self.stats.llc_evictions_data += 1;
                }
                ins.evicted = Some((victim.line << LINE_SHIFT, victim.is_instruction));
                self.policy.on_evict(set, w);
                w
            }
        };
        self.llc[base + way] = LlcLine {
            valid: true,
            line: req.line,
            dirty: false,
            is_instruction: req.is_instruction,
            is_prefetched: is_prefetch,
        };
        self.policy.on_fill(set, way, req);
        ins.installed = true;
        ins
    }

    /// Walks the candidate order, letting the pair table spare up to
    /// `qbs_max_attempts` instruction candidates.
    fn select_victim(&mut self, set: usize, order: &[usize], views: &[WayView], ins: &mut Install) -> usize {
        let Some(g) = &self.garibaldi else { return order[0] };
        let (max_attempts, cost) = (g.config().qbs_max_attempts, g.config().qbs_lookup_cost);
        for (i, &w) in order.iter().enumerate() {
            let last = i + 1 == order.len();
            if last || !views[w].is_instruction || i as u32 >= max_attempts {
                return w;
            }
            ins.queries += 1;
            ins.qbs_cycles += cost;
            self.stats.qbs_queries += 1;
            self.stats.qbs_cycles += cost;
            if !g.query_protect(views[w].line) {
                self.stats.protections_denied += 1;
                return w;
            }
            self.stats.protections_granted += 1;
            ins.protections += 1;
            self.policy.promote(set, w);
        }
        unreachable!("order is non-empty")
    }

    fn writeback(&mut self, line: u64) {
        match self.llc_way(line) {
            Some(i) => {
                self.llc[i].dirty = true;
                self.stats.writebacks_to_llc += 1;
            }
            None => self.stats.writebacks_to_memory += 1,
        }
    }
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    order.iter().all(|&w| w < n && !std::mem::replace(&mut seen[w], true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garibaldi::GaribaldiConfig;
    use crate::replacement::{LruPolicy, PolicySpec};

    fn tiny() -> HierarchyConfig {
        HierarchyConfig {
            private_capacity: 2 * 64,
            private_associativity: 2,
            llc_capacity: 4 * 2 * 64,
            llc_associativity: 2,
            latencies: Latencies::default(),
        }
    }

    fn acc(seq: u64, core: u8, kind: AccessKind, pc: u64, paddr: u64) -> MemoryAccess {
        MemoryAccess { seq, core, kind, pc, paddr }
    }

    fn lru(cfg: &HierarchyConfig) -> Box<dyn ReplacementPolicy> {
        Box::new(LruPolicy::new(cfg.llc_geometry().unwrap()))
    }

    #[test]
    fn cold_then_private_hit() {
        let cfg = HierarchyConfig::default();
        let mut h = Hierarchy::new(cfg.clone(), lru(&cfg), None).unwrap();
        let a = acc(0, 0, AccessKind::Load, 0x400, 0x1_2340);
        let o = h.access(&a);
        assert_eq!((o.level_hit, o.latency_cycles), (LevelHit::Memory, 3 + 40 + 147));
        let o = h.access(&MemoryAccess { seq: 1, ..a });
        assert_eq!((o.level_hit, o.latency_cycles), (LevelHit::Private, 3));
    }

    #[test]
    fn cross_core_instruction_conflicts_miss_in_llc() {
        let cfg = tiny();
        let mut h = Hierarchy::new(cfg.clone(), lru(&cfg), None).unwrap();
        // Every line maps to LLC set 0 (4 sets, 2 ways); each core cycles
        // three lines through its 2-way private cache.
        let per_core = [[0u64, 4, 8], [12, 16, 20]];
        let mut seq = 0;
        for round in 0..3 {
            for i in 0..3 {
                for (core, lines) in per_core.iter().enumerate() {
                    let l = lines[i];
                    let o = h.access(&acc(seq, core as u8, AccessKind::IFetch, l << 6, l << 6));
                    seq += 1;
                    if round > 0 {
                        assert_eq!(o.level_hit, LevelHit::Memory, "round {round} line {l}");
                    }
                }
            }
        }
        assert_eq!(h.stats().instruction.llc_misses, 18);
    }

    #[test]
    fn dirty_private_victims_mark_llc_copy() {
        let cfg = tiny();
        let mut h = Hierarchy::new(cfg.clone(), lru(&cfg), None).unwrap();
        // Private: 1 set x 2 ways. Store to line 1, then push it out.
        h.access(&acc(0, 0, AccessKind::Store, 0x40, 1 << 6));
        h.access(&acc(1, 0, AccessKind::Load, 0x40, 2 << 6));
        h.access(&acc(2, 0, AccessKind::Load, 0x40, 3 << 6));
        assert_eq!(h.stats().writebacks_to_llc, 1);
        assert_eq!(h.stats().writebacks_to_memory, 0);
    }

    #[test]
    fn class_totals_add_up() {
        let cfg = tiny();
        let mut h = Hierarchy::new(cfg.clone(), lru(&cfg), None).unwrap();
        for i in 0..500u64 {
            let kind = if i % 3 == 0 { AccessKind::IFetch } else { AccessKind::Load };
            let l = (i * 7) % 23;
            h.access(&acc(i, (i % 2) as u8, kind, l << 6, l << 6));
        }
        for c in [&h.stats().instruction, &h.stats().data] {
            assert_eq!(c.accesses, c.private_hits + c.llc_hits + c.llc_misses);
        }
    }

    #[test]
    fn protected_instruction_survives_and_qbs_is_bounded() {
        let cfg = tiny();
        let g = Garibaldi::new(GaribaldiConfig::default()).unwrap();
        let mut h = Hierarchy::new(cfg.clone(), lru(&cfg), Some(g)).unwrap();
        // Instruction line 0 (page 0) with its data line in another set.
        let pc = 0x7000_0000;
        let il = 0u64;
        h.access(&acc(0, 0, AccessKind::IFetch, pc, il << 6));
        // Three data lines from the same code page thrash the 2-way private
        // cache but hit in LLC sets 1..3, raising the entry's cost.
        for s in 1..31u64 {
            let dl = 65 + s % 3;
            h.access(&acc(s, 0, AccessKind::Load, pc + 4, dl << 6));
        }
        assert!(h.garibaldi().unwrap().query_protect(il));
        // Flood set 0 with data from core 1 (lines 4, 8, 12, ...).
        for (seq, l) in (100..).zip((1..20u64).map(|i| i * 4)) {
            let o = h.access(&acc(seq, 1, AccessKind::Load, 0x9000_0000, l << 6));
            assert!(o.protections <= 2 && o.qbs_queries <= 2);
            assert!(o.latency_cycles <= 3 + 40 + 147 + 2);
        }
        assert!(h.llc_contains(il));
        assert!(h.stats().protections_granted > 0);
    }

    #[test]
    fn i_oracle_serves_displaced_instructions() {
        let cfg = tiny();
        let spec: PolicySpec = "i-oracle:lru".parse().unwrap();
        let mut h = Hierarchy::new(cfg.clone(), spec.build(cfg.llc_geometry().unwrap(), None), None).unwrap();
        h.access(&acc(0, 0, AccessKind::IFetch, 0, 0));
        for i in 1..50u64 {
            h.access(&acc(i, 1, AccessKind::Load, 0x40, (i * 4) << 6));
        }
        let o = h.access(&acc(99, 2, AccessKind::IFetch, 0, 0));
        assert_eq!(o.level_hit, LevelHit::Llc);
    }

    #[test]
    fn event_log_follows_accesses() {
        let cfg = tiny();
        let mut h = Hierarchy::new(cfg.clone(), lru(&cfg), None).unwrap();
        h.record_events(true);
        h.access(&acc(5, 0, AccessKind::IFetch, 0x1000, 0x3_1000));
        h.access(&acc(6, 0, AccessKind::IFetch, 0x1000, 0x3_1000));
        h.access(&acc(7, 0, AccessKind::Load, 0x1008, 0x9000));
        let ev = h.take_events().unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[0].to_line(), "5 0 I memory 190 0xc40 - -");
        assert_eq!(ev[1].level_hit, LevelHit::Private);
        assert_eq!(ev[2].to_line(), "7 0 L memory 190 0x240 - 0xc40");
    }
}
