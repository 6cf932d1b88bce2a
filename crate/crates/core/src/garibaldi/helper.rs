//! Per-core PC-page → instruction-page translation tables.

use crate::{LINE_BYTES, PAGE_BYTES, PAGE_SHIFT};

pub const SCTR_MAX: u8 = 7;
pub const SCTR_INIT: u8 = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HelperEntry {
    pub valid: bool,
    pub vppn: u64,
    pub pppn: u64,
    pub sctr: u8,
}

/// One core's set-associative helper table, indexed by the low bits of the
/// PC's virtual page number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HelperTable {
    ways: usize,
    n_sets: usize,
    entries: Vec<HelperEntry>,
}

impl HelperTable {
    pub fn new(entries: usize, ways: usize) -> Self {
        let ways = ways.clamp(1, entries.max(1));
        let n_sets = (entries / ways).max(1);
        HelperTable { ways, n_sets, entries: vec![HelperEntry::default(); n_sets * ways] }
    }

    pub fn set_index(&self, vppn: u64) -> usize {
        (vppn as usize) & (self.n_sets - 1)
    }

    pub fn set(&self, index: usize) -> &[HelperEntry] {
        &self.entries[index * self.ways..(index + 1) * self.ways]
    }

    pub fn lookup(&self, vppn: u64) -> Option<u64> {
        self.set(self.set_index(vppn)).iter().find(|e| e.valid && e.vppn == vppn).map(|e| e.pppn)
    }

    /// Records `vppn → pppn` observed on an instruction fetch.
    pub fn record(&mut self, vppn: u64, pppn: u64) {
        let base = self.set_index(vppn) * self.ways;
        let set = &mut self.entries[base..base + self.ways];
        if let Some(e) = set.iter_mut().find(|e| e.valid && e.vppn == vppn) {
            if e.pppn == pppn {
                e.sctr = (e.sctr + 1).min(SCTR_MAX);
            } else {
                *e = HelperEntry { valid: true, vppn, pppn, sctr: SCTR_INIT };
            }
            return;
        }
        let fresh = HelperEntry { valid: true, vppn, pppn, sctr: SCTR_INIT };
        if let Some(e) = set.iter_mut().find(|e| !e.valid) {
            *e = fresh;
            return;
        }
        for e in set.iter_mut() {
            e.sctr = e.sctr.saturating_sub(1);
        }
        let victim = (0..set.len()).min_by_key(|&w| (set[w].sctr, w)).expect("non-empty set");
        set[victim] = fresh;
    }

    /// Instruction-line physical address of the code that issued `data_pc`.
    pub fn deduce_il_pa(&self, data_pc: u64) -> Option<u64> {
        let pppn = self.lookup(data_pc >> PAGE_SHIFT)?;
        Some((pppn << PAGE_SHIFT) | (data_pc & (PAGE_BYTES - LINE_BYTES)))
    }
}

/// Helper tables for every core.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HelperTables {
    entries: usize,
    ways: usize,
    tables: Vec<HelperTable>,
}

impl HelperTables {
    pub fn new(entries: usize, ways: usize) -> Self {
        HelperTables { entries, ways, tables: Vec::new() }
    }

    pub fn core(&self, core: u8) -> Option<&HelperTable> {
        self.tables.get(core as usize)
    }

    pub fn record_ifetch(&mut self, core: u8, pc: u64, il_pa: u64) {
        let core = core as usize;
        while self.tables.len() <= core {
            self.tables.push(HelperTable::new(self.entries, self.ways));
        }
        self.tables[core].record(pc >> PAGE_SHIFT, il_pa >> PAGE_SHIFT);
    }

    pub fn deduce_il_pa(&self, core: u8, data_pc: u64) -> Option<u64> {
        self.core(core)?.deduce_il_pa(data_pc)
    }
}
