//! Pairwise instruction-data management layer for the shared LLC.
//!
//! Instruction fetches teach per-core helper tables how to translate a PC
//! page to its physical code page. Data accesses use that translation to
//! find the instruction line that issued them and update the line's pair
//! table entry: a miss cost that rises when the paired data hits in the LLC,
//! and a few recorded data-line addresses. The cache consults the entry
//! before evicting an instruction line, and on an instruction miss
//! prefetches the recorded data lines.

mod color;
mod helper;
mod table;

use serde::{Deserialize, Serialize};

pub use color::{adjust_threshold, aged_cost, ColorState, PeriodCounters};
pub use helper::{HelperEntry, HelperTable, HelperTables, SCTR_INIT, SCTR_MAX};
pub use table::{xor_fold, DlField, DppnEntry, DppnTable, PairEntry, PairTable, MAX_K, MISS_COST_MAX};

use crate::{LINE_SHIFT, PADDR_BITS, PAGE_SHIFT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaribaldiConfig {
    pub enabled: bool,
    /// Data-line fields per pair-table entry.
    pub k: usize,
    pub pair_table_entries: usize,
    pub dppn_entries: usize,
    /// Helper-table entries per core.
    pub helper_entries: usize,
    pub helper_ways: usize,
    pub color_bits: u32,
    /// LLC accesses per color period.
    #[serde(rename = "period_N", alias = "period_n")]
    pub period_n: u64,
    pub threshold_init: u8,
    pub threshold_step: u8,
    pub threshold_margin: f64,
    /// Pins the threshold and disables the controller.
    pub threshold_fixed: Option<u8>,
    pub initial_miss_cost: u8,
    /// Length of each core's ring of recent instruction-miss PCs.
    pub pmu_recent_pcs: usize,
    pub qbs_max_attempts: u32,
    pub qbs_lookup_cost: u64,
}

impl Default for GaribaldiConfig {
    fn default() -> Self {
        GaribaldiConfig {
            enabled: true,
            k: 1,
            pair_table_entries: 16384,
            dppn_entries: 8192,
            helper_entries: 128,
            helper_ways: 4,
            color_bits: 3,
            period_n: 100_000,
            threshold_init: 32,
            threshold_step: 1,
            threshold_margin: 0.05,
            threshold_fixed: None,
            initial_miss_cost: 32,
            pmu_recent_pcs: 10,
            qbs_max_attempts: 2,
            qbs_lookup_cost: 1,
        }
    }
}

impl GaribaldiConfig {
    pub fn validate(&self) -> Result<(), String> {
        let pow2 = |name: &str, v: usize| {
            if v >= 2 && v.is_power_of_two() {
                Ok(())
            } else {
                Err(format!("garibaldi.{name} must be a power of two >= 2, got {v}"))
            }
        };
        if self.k > MAX_K {
            return Err(format!("garibaldi.k must be in 0..={MAX_K}, got {}", self.k));
        }
        pow2("pair_table_entries", self.pair_table_entries)?;
        pow2("dppn_entries", self.dppn_entries)?;
        if self.pair_table_entries > 1 << 30 || self.dppn_entries > 1 << 30 {
            return Err("garibaldi table sizes must not exceed 2^30 entries".into());
        }
        if self.helper_ways == 0
            || !self.helper_entries.is_multiple_of(self.helper_ways)
            || !(self.helper_entries / self.helper_ways).is_power_of_two()
        {
            return Err(format!(
                "garibaldi.helper_entries ({}) must be a power-of-two multiple of helper_ways ({})",
                self.helper_entries, self.helper_ways
            ));
        }
        if !(1..=6).contains(&self.color_bits) {
            return Err(format!("garibaldi.color_bits must be in 1..=6, got {}", self.color_bits));
        }
        if self.period_n == 0 {
            return Err("garibaldi.period_N must be positive".into());
        }
        for (name, v) in [
            ("threshold_init", Some(self.threshold_init)),
            ("threshold_fixed", self.threshold_fixed),
            ("initial_miss_cost", Some(self.initial_miss_cost)),
        ] {
            if v.is_some_and(|v| v > MISS_COST_MAX) {
                return Err(format!("garibaldi.{name} must be <= {MISS_COST_MAX}"));
            }
        }
        if !(self.threshold_margin >= 0.0 && self.threshold_margin < 1.0) {
            return Err(format!("garibaldi.threshold_margin must be in [0, 1), got {}", self.threshold_margin));
        }
        Ok(())
    }
}

/// Bit widths of the stored structures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StorageWidths {
    pub pair_tag_bits: u32,
    /// Tag, miss cost, color and valid bit.
    pub pair_entry_bits: u32,
    pub dl_field_bits: u32,
    pub dppn_stored_bits: u32,
    pub dppn_entry_bits: u32,
}

impl StorageWidths {
    pub fn of(cfg: &GaribaldiConfig) -> Self {
        let line_bits = PADDR_BITS - LINE_SHIFT;
        let page_bits = PADDR_BITS - PAGE_SHIFT;
        let pair_index = cfg.pair_table_entries.trailing_zeros();
        let dppn_index = cfg.dppn_entries.trailing_zeros();
        let pair_tag_bits = line_bits - pair_index;
        let dppn_stored_bits = page_bits - dppn_index;
        StorageWidths {
            pair_tag_bits,
            pair_entry_bits: pair_tag_bits + 6 + cfg.color_bits + 1,
            dl_field_bits: (PAGE_SHIFT - LINE_SHIFT) + dppn_index + 1 + 3,
            dppn_stored_bits,
            dppn_entry_bits: dppn_stored_bits + 3 + 1,
        }
    }

    /// Total bytes of the pair table (with `k` fields), D_PPN table and
    /// helper tables for `cores` cores.
    pub fn total_bytes(&self, cfg: &GaribaldiConfig, cores: usize) -> u64 {
        let pair = (self.pair_entry_bits as u64 + cfg.k as u64 * self.dl_field_bits as u64) * cfg.pair_table_entries as u64;
        let dppn = self.dppn_entry_bits as u64 * cfg.dppn_entries as u64;
        let helper = 64 * cfg.helper_entries as u64 * cores as u64;
        (pair + dppn + helper).div_ceil(8)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GaribaldiStats {
    pub pair_allocations: u64,
    pub pair_preserved: u64,
    pub pair_updates: u64,
    pub dl_records: u64,
    pub unattributed_data: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Garibaldi {
    cfg: GaribaldiConfig,
    helpers: HelperTables,
    pairs: PairTable,
    dppn: DppnTable,
    color: ColorState,
    stats: GaribaldiStats,
}

impl Garibaldi {
    pub fn new(cfg: GaribaldiConfig) -> Result<Self, String> {
        cfg.validate()?;
        let color = ColorState::new(
            cfg.color_bits,
            cfg.period_n,
            cfg.threshold_fixed.unwrap_or(cfg.threshold_init),
            cfg.threshold_fixed.is_none(),
            cfg.threshold_step,
            cfg.threshold_margin,
            cfg.pmu_recent_pcs,
        );
        Ok(Garibaldi {
            helpers: HelperTables::new(cfg.helper_entries, cfg.helper_ways),
            pairs: PairTable::new(cfg.pair_table_entries, cfg.k),
            dppn: DppnTable::new(cfg.dppn_entries),
            color,
            stats: GaribaldiStats::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &GaribaldiConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &GaribaldiStats {
        &self.stats
    }

    pub fn pair_table(&self) -> &PairTable {
        &self.pairs
    }

    pub fn dppn_table(&self) -> &DppnTable {
        &self.dppn
    }

    pub fn helpers(&self) -> &HelperTables {
        &self.helpers
    }

    pub fn color_state(&self) -> &ColorState {
        &self.color
    }

    pub fn threshold(&self) -> u8 {
        self.color.threshold()
    }

    pub fn current_color(&self) -> u8 {
        self.color.color()
    }

    pub fn aged(&self, entry: &PairEntry) -> u8 {
        aged_cost(entry.miss_cost, entry.color, self.color.color(), self.color.color_bits())
    }

    /// Instruction fetch seen at the LLC. On a miss returns the line
    /// addresses to prefetch.
    pub fn on_llc_ifetch(&mut self, core: u8, pc: u64, il_line: u64, hit: bool) -> Vec<u64> {
        self.helpers.record_ifetch(core, pc, il_line << LINE_SHIFT);
        if hit {
            return Vec::new();
        }
        self.color.record_instruction_miss(core, pc);
        let (idx, tag) = self.pairs.locate(il_line);
        let k = self.pairs.k();
        let e = self.pairs.entry_mut(idx);
        if !(e.valid && e.tag == tag) {
            return Vec::new();
        }
        for f in &mut e.fields[..k] {
            f.old = true;
        }
        let fields = e.fields;
        fields[..k]
            .iter()
            .filter(|f| f.valid)
            .filter_map(|f| {
                let page = self.dppn.page_at(f.d_ppn_idx as usize)?;
                Some((page << (PAGE_SHIFT - LINE_SHIFT)) | f.d_pfo as u64)
            })
            .collect()
    }

    pub fn deduce_il_pa(&self, core: u8, data_pc: u64) -> Option<u64> {
        self.helpers.deduce_il_pa(core, data_pc)
    }

    /// Demand data access seen at the LLC.
    pub fn on_llc_data_access(&mut self, core: u8, pc: u64, dl_pa: u64, hit: bool) {
        let Some(il_pa) = self.deduce_il_pa(core, pc) else {
            self.stats.unattributed_data += 1;
            return;
        };
        let (idx, tag) = self.pairs.locate(il_pa >> LINE_SHIFT);
        let current = self.color.color();
        let e = self.pairs.entry(idx);
        if !(e.valid && e.tag == tag) && !self.pair_entry_replace(idx, il_pa >> LINE_SHIFT) {
            return;
        }
        self.stats.pair_updates += 1;
        let k = self.pairs.k();
        let e = self.pairs.entry_mut(idx);
        e.miss_cost = if hit { (e.miss_cost + 1).min(MISS_COST_MAX) } else { e.miss_cost.saturating_sub(1) };
        if e.color != current {
            e.color = current;
            e.fields[..k].iter_mut().for_each(|f| f.old = true);
        }
        self.record_data_line(idx, dl_pa);
    }

    fn record_data_line(&mut self, idx: usize, dl_pa: u64) {
        let k = self.pairs.k();
        if k == 0 {
            return;
        }
        let page = dl_pa >> PAGE_SHIFT;
        let pfo = ((dl_pa >> LINE_SHIFT) & 63) as u8;
        let slot = self.dppn.index_of(page) as u16;
        let resident = self.dppn.holds(page);
        let fields = &mut self.pairs.entry_mut(idx).fields[..k];
        if resident {
            if let Some(f) = fields.iter_mut().find(|f| f.valid && f.d_ppn_idx == slot && f.d_pfo == pfo) {
                f.sctr = (f.sctr + 1).min(SCTR_MAX);
                f.old = false;
                self.dppn.touch(page);
                return;
            }
        }
        let Some(f) = fields.iter_mut().find(|f| f.old) else { return };
        f.old = false;
        if f.valid && f.sctr >= SCTR_INIT {
            f.sctr -= 1;
            return;
        }
        if let Some(slot) = self.dppn.touch(page) {
            *f = DlField { valid: true, d_pfo: pfo, d_ppn_idx: slot as u16, old: false, sctr: SCTR_INIT };
            self.stats.dl_records += 1;
        }
    }

    /// Collision at `idx` with a different instruction line. Returns true if
    /// the slot now belongs to `new_line`.
    pub fn pair_entry_replace(&mut self, idx: usize, new_line: u64) -> bool {
        let current = self.color.color();
        let threshold = self.color.threshold();
        let k = self.pairs.k();
        let aged = self.aged(self.pairs.entry(idx));
        let e = self.pairs.entry_mut(idx);
        if e.valid && aged > threshold {
            e.miss_cost = aged;
            if e.color != current {
                e.color = current;
                e.fields[..k].iter_mut().for_each(|f| f.old = true);
            }
            self.stats.pair_preserved += 1;
            return false;
        }
        let (_, tag) = self.pairs.locate(new_line);
        let mut fields = [DlField::default(); MAX_K];
        fields[..k].iter_mut().for_each(|f| f.old = true);
        *self.pairs.entry_mut(idx) =
            PairEntry { valid: true, tag, miss_cost: self.cfg.initial_miss_cost, color: current, fields };
        self.stats.pair_allocations += 1;
        true
    }

    /// Should the instruction line be spared from eviction? Never mutates.
    pub fn query_protect(&self, il_line: u64) -> bool {
        self.pairs.lookup(il_line).is_some_and(|e| self.aged(e) > self.color.threshold())
    }

    pub fn is_tracked_il(&self, line: u64) -> bool {
        self.pairs.lookup(line).is_some()
    }

    /// One LLC demand access for the coloring timer and PMU.
    pub fn color_tick(&mut self, core: u8, is_instruction: bool, pc: u64, hit: bool) {
        self.color.tick(core, is_instruction, pc, hit);
    }

    pub fn dump_pair_table(&self) -> String {
        self.pairs.dump()
    }
}
