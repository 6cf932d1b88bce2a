//! Synthetic multi-core trace generators.
//!
//! Both generators model a homogeneous multi-core workload: every core runs
//! the same code image, executing "functions" (runs of consecutive
//! instruction lines). Each executed line produces one instruction fetch
//! followed by `accesses_per_instr` data accesses issued by PCs inside that
//! line. Virtual code pages and data lines are mapped to physical pages
//! through a per-trace random page table.
//!
//! * Many-to-few: a large body of cold code whose data slots are statically
//!   bound to a small pool of shared data lines (each pool line is bound to
//!   `data_sharing_degree` slots on average), plus a small hot-code region
//!   (`background_fraction` of executions) that streams through the rest of
//!   the data region.
//! * Few-to-many: a few hot code lines that stream through a large data
//!   region.
//!
//! Per-core streams are interleaved round-robin with a seeded burst jitter.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AccessKind, MemoryAccess, TraceError, MAX_CORES};
use crate::{LINE_BYTES, LINE_SHIFT, PADDR_BITS, PAGE_BYTES, PAGE_SHIFT};

const CODE_VBASE: u64 = 0x0000_5555_5540_0000;
const LINES_PER_PAGE: u64 = PAGE_BYTES / LINE_BYTES;
/// Minimum instruction:data (or data:instruction) line ratio.
const MIN_RATIO: u64 = 4;
/// With at least 4 instruction lines per data line, a streaming region below
/// 15x the data lines keeps mean data reuse above mean instruction reuse.
const MAX_STREAM_FACTOR: u64 = 15;
/// Largest burst a core emits in one round-robin turn.
const MAX_BURST: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceGenConfig {
    pub n_instr_lines: u64,
    pub n_data_lines: u64,
    /// Mean number of distinct data-access PCs bound to each shared data line.
    pub data_sharing_degree: u64,
    pub accesses_per_instr: u32,
    pub cores: u32,
    pub page_size: u64,
    pub rng_seed: u64,
    /// Instruction-line executions per core.
    pub steps_per_core: u64,
    /// Lines executed back-to-back per function call.
    pub function_lines: u64,
    /// Fraction of data accesses emitted as stores.
    pub store_fraction: f64,
    /// Many-to-few only: fraction of executions spent in hot streaming code.
    pub background_fraction: f64,
    /// Many-to-few only: share of the code image that is hot streaming code.
    pub hot_code_fraction: f64,
    /// Many-to-few only: size of the region streamed by the hot code, as a
    /// multiple of `n_data_lines`. Must stay below 15 so that data lines
    /// remain hotter than instruction lines.
    pub stream_factor: u64,
}

impl Default for TraceGenConfig {
    fn default() -> Self {
        Self::many_to_few_default()
    }
}

impl TraceGenConfig {
    /// Default configuration of the many-to-few generator, sized against the
    /// default hierarchy (128 KiB private caches, 1.5 MiB LLC, 4 cores).
    pub fn many_to_few_default() -> Self {
        TraceGenConfig {
            n_instr_lines: 16384,
            n_data_lines: 4096,
            data_sharing_degree: 32,
            accesses_per_instr: 4,
            cores: 4,
            page_size: PAGE_BYTES,
            rng_seed: 7,
            steps_per_core: 160_000,
            function_lines: 8,
            store_fraction: 0.1,
            background_fraction: 0.2,
            hot_code_fraction: 1.0 / 32.0,
            stream_factor: 8,
        }
    }

    /// Default configuration of the few-to-many generator.
    pub fn few_to_many_default() -> Self {
        TraceGenConfig {
            n_instr_lines: 64,
            n_data_lines: 65536,
            data_sharing_degree: 1,
            accesses_per_instr: 4,
            cores: 4,
            page_size: PAGE_BYTES,
            rng_seed: 7,
            steps_per_core: 160_000,
            function_lines: 8,
            store_fraction: 0.1,
            background_fraction: 0.0,
            hot_code_fraction: 0.0,
            stream_factor: 0,
        }
    }

    fn validate(&self) -> Result<(), TraceError> {
        let err = |m: &str| Err(TraceError::Config(m.to_string()));
        if self.n_instr_lines == 0 || self.n_data_lines == 0 {
            return err("n_instr_lines and n_data_lines must be positive");
        }
        if self.data_sharing_degree == 0 || self.steps_per_core == 0 || self.function_lines == 0 {
            return err("data_sharing_degree, steps_per_core and function_lines must be positive");
        }
        if self.accesses_per_instr == 0 || self.accesses_per_instr > 15 {
            return err("accesses_per_instr must be in 1..=15");
        }
        if self.cores == 0 || self.cores as usize > MAX_CORES {
            return err("cores must be in 1..=64");
        }
        if self.stream_factor >= MAX_STREAM_FACTOR {
            return Err(TraceError::Config(format!("stream_factor must be below {MAX_STREAM_FACTOR}")));
        }
        if self.page_size != PAGE_BYTES {
            return err("page_size must be 4096");
        }
        for (name, v) in [
            ("store_fraction", self.store_fraction),
            ("background_fraction", self.background_fraction),
            ("hot_code_fraction", self.hot_code_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TraceError::Config(format!("{name} must be within [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Random injective page table from virtual/logical pages to 32-bit
/// physical page numbers.
struct PageTable {
    frames: Vec<u64>,
}

impl PageTable {
    fn new(pages: u64, used: &mut HashSet<u64>, rng: &mut ChaCha8Rng) -> Self {
        let max_ppn = 1u64 << (PADDR_BITS - PAGE_SHIFT);
        let frames = (0..pages)
            .map(|_| loop {
                // Frame 0 is kept free so no line sits at physical address 0.
                let ppn = rng.gen_range(1..max_ppn);
                if used.insert(ppn) {
                    break ppn;
                }
            })
            .collect();
        PageTable { frames }
    }

    fn line_paddr(&self, line: u64) -> u64 {
        self.frames[(line / LINES_PER_PAGE) as usize] << PAGE_SHIFT | (line % LINES_PER_PAGE) << LINE_SHIFT
    }
}

struct Image {
    code: PageTable,
    data: PageTable,
}

impl Image {
    fn new(cfg: &TraceGenConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut used = HashSet::new();
        let code = PageTable::new(cfg.n_instr_lines.div_ceil(LINES_PER_PAGE), &mut used, rng);
        let data = PageTable::new((cfg.n_data_lines * (1 + cfg.stream_factor)).div_ceil(LINES_PER_PAGE), &mut used, rng);
        Image { code, data }
    }

    fn code_vaddr(line: u64) -> u64 {
        CODE_VBASE + line * LINE_BYTES
    }
}

/// Per-core access emitter.
struct CoreStream<'a> {
    core: u8,
    image: &'a Image,
    cfg: &'a TraceGenConfig,
    out: Vec<(u8, AccessKind, u64, u64)>,
}

impl CoreStream<'_> {
    fn ifetch(&mut self, line: u64) -> u64 {
        let pc = Image::code_vaddr(line);
        let paddr = self.image.code.line_paddr(line) | (pc & (LINE_BYTES - 1));
        self.out.push((self.core, AccessKind::IFetch, pc, paddr));
        pc
    }

    fn data(&mut self, pc: u64, data_line: u64, rng: &mut ChaCha8Rng) {
        let kind = if rng.gen_bool(self.cfg.store_fraction) { AccessKind::Store } else { AccessKind::Load };
        let offset = rng.gen_range(0..LINE_BYTES / 8) * 8;
        self.out.push((self.core, kind, pc, self.image.data.line_paddr(data_line) | offset));
    }
}

/// Data-slot PC inside an instruction line.
fn slot_pc(line_pc: u64, slot: u32) -> u64 {
    line_pc + 4 * (slot as u64 + 1)
}

/// A contiguous region of code lines, executed in `function_lines` chunks.
#[derive(Clone, Copy)]
struct CodeRegion {
    start: u64,
    len: u64,
}

impl CodeRegion {
    fn call(&self, function_lines: u64, rng: &mut ChaCha8Rng) -> impl Iterator<Item = u64> {
        let flen = function_lines.min(self.len);
        let functions = self.len.div_ceil(flen);
        let f = rng.gen_range(0..functions);
        let first = self.start + f * flen;
        let end = (first + flen).min(self.start + self.len);
        first..end
    }
}

fn interleave(cfg: &TraceGenConfig, per_core: Vec<Vec<(u8, AccessKind, u64, u64)>>, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let total = per_core.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut cursors = vec![0usize; per_core.len()];
    let mut seq = 0;
    while out.len() < total {
        for (core, stream) in per_core.iter().enumerate() {
            let burst = 1 + rng.gen_range(0..MAX_BURST) as usize;
            let from = cursors[core];
            let to = (from + burst).min(stream.len());
            for &(c, kind, pc, paddr) in &stream[from..to] {
                out.push(MemoryAccess { seq, core: c, kind, pc, paddr });
                seq += 1;
            }
            cursors[core] = to;
        }
    }
    debug_assert!(cfg.cores as usize == per_core.len());
    out
}

/// Many cold instruction lines feeding a few hot, widely shared data lines.
pub fn generate_many_to_few(cfg: &TraceGenConfig) -> Result<Vec<MemoryAccess>, TraceError> {
    cfg.validate()?;
    if cfg.n_instr_lines < MIN_RATIO * cfg.n_data_lines {
        return Err(TraceError::Config(format!(
            "many-to-few needs n_instr_lines >= {MIN_RATIO} x n_data_lines ({} < {})",
            cfg.n_instr_lines,
            MIN_RATIO * cfg.n_data_lines
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let image = Image::new(cfg, &mut rng);
    let a = cfg.accesses_per_instr;

    let hot_len = ((cfg.n_instr_lines as f64 * cfg.hot_code_fraction) as u64).min(cfg.n_instr_lines - 1);
    let hot = CodeRegion { start: 0, len: hot_len.max(1) };
    let cold = CodeRegion { start: hot_len, len: cfg.n_instr_lines - hot_len };

    // Shared pool at the front of the data region; the rest is streamed.
    let cold_slots = cold.len * a as u64;
    let pool = cold_slots.div_ceil(cfg.data_sharing_degree).clamp(1, cfg.n_data_lines);
    let region = cfg.n_data_lines * (1 + cfg.stream_factor);
    let (stream_start, stream_len) = if pool < region {
        (pool, region - pool)
    } else {
        (0, cfg.n_data_lines)
    };

    // Balanced static binding: shuffled slots dealt round-robin over the pool.
    let mut order: Vec<u64> = (0..cold_slots).collect();
    order.shuffle(&mut rng);
    let mut binding = vec![0u64; cold_slots as usize];
    for (i, slot) in order.into_iter().enumerate() {
        binding[slot as usize] = i as u64 % pool;
    }

    let mut per_core = Vec::with_capacity(cfg.cores as usize);
    for core in 0..cfg.cores {
        let mut cs = CoreStream { core: core as u8, image: &image, cfg, out: Vec::new() };
        let mut cursor = stream_len * core as u64 / cfg.cores as u64;
        let mut steps = 0;
        while steps < cfg.steps_per_core {
            let background = hot_len > 0 && rng.gen_bool(cfg.background_fraction);
            let region = if background { hot } else { cold };
            for line in region.call(cfg.function_lines, &mut rng) {
                if steps == cfg.steps_per_core {
                    break;
                }
                steps += 1;
                let pc = cs.ifetch(line);
                for slot in 0..a {
                    let data_line = if background {
                        cursor = (cursor + 1) % stream_len;
                        stream_start + cursor
                    } else {
                        binding[((line - cold.start) * a as u64 + slot as u64) as usize]
                    };
                    cs.data(slot_pc(pc, slot), data_line, &mut rng);
                }
            }
        }
        per_core.push(cs.out);
    }
    Ok(interleave(cfg, per_core, &mut rng))
}

/// A few hot instruction lines streaming over many data lines.
pub fn generate_few_to_many(cfg: &TraceGenConfig) -> Result<Vec<MemoryAccess>, TraceError> {
    cfg.validate()?;
    if cfg.n_data_lines < MIN_RATIO * cfg.n_instr_lines {
        return Err(TraceError::Config(format!(
            "few-to-many needs n_data_lines >= {MIN_RATIO} x n_instr_lines ({} < {})",
            cfg.n_data_lines,
            MIN_RATIO * cfg.n_instr_lines
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let image = Image::new(cfg, &mut rng);
    let code = CodeRegion { start: 0, len: cfg.n_instr_lines };

    let mut per_core = Vec::with_capacity(cfg.cores as usize);
    for core in 0..cfg.cores {
        let mut cs = CoreStream { core: core as u8, image: &image, cfg, out: Vec::new() };
        let mut cursor = cfg.n_data_lines * core as u64 / cfg.cores as u64;
        let mut steps = 0;
        while steps < cfg.steps_per_core {
            for line in code.call(cfg.function_lines, &mut rng) {
                if steps == cfg.steps_per_core {
                    break;
                }
                steps += 1;
                let pc = cs.ifetch(line);
                for slot in 0..cfg.accesses_per_instr {
                    cursor = (cursor + 1) % cfg.n_data_lines;
                    cs.data(slot_pc(pc, slot), cursor, &mut rng);
                }
            }
        }
        per_core.push(cs.out);
    }
    Ok(interleave(cfg, per_core, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    fn small(n_instr: u64, n_data: u64, sharing: u64, cores: u32, seed: u64) -> TraceGenConfig {
        TraceGenConfig {
            n_instr_lines: n_instr,
            n_data_lines: n_data,
            data_sharing_degree: sharing,
            cores,
            rng_seed: seed,
            steps_per_core: 2000,
            ..TraceGenConfig::many_to_few_default()
        }
    }

    #[test]
    fn degenerate_many_to_few_uses_single_data_line() {
        let trace = generate_many_to_few(&small(4, 1, 1, 1, 0)).unwrap();
        let data: HashSet<u64> = trace.iter().filter(|a| !a.is_instruction()).map(|a| a.line()).collect();
        assert_eq!(data.len(), 1);
    }

    #[test]
    fn ratio_is_enforced() {
        assert!(matches!(generate_many_to_few(&small(4, 4, 1, 1, 0)), Err(TraceError::Config(_))));
        assert!(matches!(generate_few_to_many(&small(4, 4, 1, 1, 0)), Err(TraceError::Config(_))));
        let zero = TraceGenConfig { n_data_lines: 0, ..small(4, 1, 1, 1, 0) };
        assert!(generate_many_to_few(&zero).is_err());
        let wide = TraceGenConfig { stream_factor: 15, ..small(64, 4, 1, 1, 0) };
        assert!(generate_many_to_few(&wide).is_err());
    }

    #[test]
    fn degenerate_few_to_many_fetches_one_line() {
        let trace = generate_few_to_many(&small(1, 4, 1, 1, 0)).unwrap();
        let code: HashSet<u64> = trace.iter().filter(|a| a.is_instruction()).map(|a| a.line()).collect();
        assert_eq!(code.len(), 1);
    }

    #[test]
    fn records_are_well_formed() {
        let trace = generate_many_to_few(&small(1024, 128, 8, 4, 3)).unwrap();
        for (i, acc) in trace.iter().enumerate() {
            assert_eq!(acc.seq, i as u64);
            acc.validate().unwrap();
        }
        // Per-core order keeps each fetch ahead of the data accesses it issues.
        let mut last_fetch: HashMap<u8, u64> = HashMap::new();
        for acc in &trace {
            if acc.is_instruction() {
                last_fetch.insert(acc.core, acc.pc);
            } else {
                assert_eq!(acc.pc & !63, last_fetch[&acc.core]);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small(1024, 128, 8, 4, 11);
        assert_eq!(generate_many_to_few(&cfg).unwrap(), generate_many_to_few(&cfg).unwrap());
        let other = TraceGenConfig { rng_seed: 12, ..cfg.clone() };
        assert_ne!(generate_many_to_few(&cfg).unwrap(), generate_many_to_few(&other).unwrap());
    }

    #[test]
    fn pool_lines_are_shared_by_the_configured_degree() {
        // 4096 cold lines x 4 slots / 32 = 512 pool lines, each bound to 32 PCs.
        let cfg = TraceGenConfig {
            steps_per_core: 40_000,
            background_fraction: 0.0,
            hot_code_fraction: 0.0,
            ..small(4096, 1024, 32, 1, 5)
        };
        let trace = generate_many_to_few(&cfg).unwrap();
        let mut pcs: HashMap<u64, HashSet<u64>> = HashMap::new();
        for acc in trace.iter().filter(|a| !a.is_instruction()) {
            pcs.entry(acc.line()).or_default().insert(acc.pc);
        }
        assert_eq!(pcs.len(), 512);
        let mean = pcs.values().map(|s| s.len()).sum::<usize>() as f64 / pcs.len() as f64;
        assert!((31.0..=32.0).contains(&mean), "mean sharing {mean}");
    }
}
