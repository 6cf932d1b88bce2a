//! Main pair table and the tagless D_PPN table.

use std::fmt::Write as _;

use super::helper::{SCTR_INIT, SCTR_MAX};

pub const MISS_COST_MAX: u8 = 63;
pub const MAX_K: usize = 8;

/// XOR of all `bits`-wide chunks of `x`.
pub fn xor_fold(x: u64, bits: u32) -> u64 {
    assert!(bits > 0 && bits < 64);
    let mask = (1u64 << bits) - 1;
    let mut v = x;
    let mut out = 0;
    while v != 0 {
        out ^= v & mask;
        v >>= bits;
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DlField {
    pub valid: bool,
    /// Line offset within the 4 KiB page.
    pub d_pfo: u8,
    pub d_ppn_idx: u16,
    pub old: bool,
    pub sctr: u8,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PairEntry {
    pub valid: bool,
    pub tag: u64,
    pub miss_cost: u8,
    pub color: u8,
    pub fields: [DlField; MAX_K],
}

/// Direct-mapped table keyed by instruction-line address.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairTable {
    index_bits: u32,
    k: usize,
    entries: Vec<PairEntry>,
}

impl PairTable {
    pub fn new(n_entries: usize, k: usize) -> Self {
        assert!(n_entries.is_power_of_two() && n_entries >= 2);
        assert!(k <= MAX_K);
        PairTable { index_bits: n_entries.trailing_zeros(), k, entries: vec![PairEntry::default(); n_entries] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(index, tag)` of an instruction line address.
    pub fn locate(&self, line: u64) -> (usize, u64) {
        (xor_fold(line, self.index_bits) as usize, line >> self.index_bits)
    }

    /// Inverse of `locate`.
    pub fn line_of(&self, index: usize, tag: u64) -> u64 {
        let low = index as u64 ^ xor_fold(tag, self.index_bits);
        (tag << self.index_bits) | low
    }

    pub fn entry(&self, index: usize) -> &PairEntry {
        &self.entries[index]
    }

    pub fn entry_mut(&mut self, index: usize) -> &mut PairEntry {
        &mut self.entries[index]
    }

    pub fn lookup(&self, line: u64) -> Option<&PairEntry> {
        let (index, tag) = self.locate(line);
        let e = &self.entries[index];
        (e.valid && e.tag == tag).then_some(e)
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, &PairEntry)> {
        self.entries.iter().enumerate().filter(|(_, e)| e.valid)
    }

    /// One line per valid entry: `index tag cost color` followed by
    /// `pfo/idx/old/sctr` for each field (`-` when the field is empty).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.iter_valid() {
            write!(out, "{i} {:#x} {} {}", e.tag, e.miss_cost, e.color).unwrap();
            for f in &e.fields[..self.k] {
                if f.valid {
                    write!(out, " {}/{}/{}/{}", f.d_pfo, f.d_ppn_idx, u8::from(f.old), f.sctr).unwrap();
                } else {
                    out.push_str(" -");
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DppnEntry {
    pub valid: bool,
    /// Page-number bits above the index.
    pub stored: u64,
    pub sctr: u8,
}

/// Tagless table of data page numbers shared by all DL fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DppnTable {
    index_bits: u32,
    entries: Vec<DppnEntry>,
}

impl DppnTable {
    pub fn new(n_entries: usize) -> Self {
        assert!(n_entries.is_power_of_two() && n_entries >= 2);
        DppnTable { index_bits: n_entries.trailing_zeros(), entries: vec![DppnEntry::default(); n_entries] }
    }

    pub fn index_of(&self, page: u64) -> usize {
        xor_fold(page, self.index_bits) as usize
    }

    pub fn stored_of(&self, page: u64) -> u64 {
        page >> self.index_bits
    }

    /// Page number held in slot `idx`, if any.
    pub fn page_at(&self, idx: usize) -> Option<u64> {
        let e = &self.entries[idx];
        e.valid.then(|| (e.stored << self.index_bits) | (idx as u64 ^ xor_fold(e.stored, self.index_bits)))
    }

    pub fn entry(&self, idx: usize) -> &DppnEntry {
        &self.entries[idx]
    }

    pub fn holds(&self, page: u64) -> bool {
        self.page_at(self.index_of(page)) == Some(page)
    }

    /// Uses `page`, returning its slot if the slot now holds it.
    pub fn touch(&mut self, page: u64) -> Option<usize> {
        let idx = self.index_of(page);
        let stored = self.stored_of(page);
        let e = &mut self.entries[idx];
        if e.valid && e.stored == stored {
            e.sctr = (e.sctr + 1).min(SCTR_MAX);
            return Some(idx);
        }
        if e.valid {
            e.sctr = e.sctr.saturating_sub(1);
            if e.sctr > 0 {
                return None;
            }
        }
        *e = DppnEntry { valid: true, stored, sctr: SCTR_INIT };
        Some(idx)
    }
}
