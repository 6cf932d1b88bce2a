//! Trace-driven simulator of a multi-core cache hierarchy with a shared
//! last-level cache (LLC) and a pairwise instruction-data management layer.
//!
//! The crate is organised bottom-up:
//!
//! - [`trace`]: the access record, the on-disk trace formats and the
//!   synthetic many-to-few / few-to-many generators.
//! - [`cache`]: set-associative storage, the private-cache + LLC hierarchy,
//!   the event log and the in-order stall model.
//! - [`replacement`]: LRU, DRRIP, Hawkeye-lite, Mockingjay-lite, the offline
//!   Belady (MIN) oracle and the instruction-oracle wrapper.
//! - [`garibaldi`]: helper tables, the pair table, the D_PPN table, the
//!   coloring timer and threshold controller, query-based protection and
//!   pairwise prefetch.
//! - [`metrics`]: reuse-distance profiles, conditional miss rates and the
//!   per-run report.
//! - [`config`] / [`sim`]: the JSON run configuration and the single-run
//!   driver used by the CLI and the browser demo.

pub mod cache;
pub mod config;
pub mod garibaldi;
pub mod metrics;
pub mod replacement;
pub mod sim;
pub mod trace;

/// Cache line size in bytes. Fixed throughout the model.
pub const LINE_BYTES: u64 = 64;
/// log2 of [`LINE_BYTES`].
pub const LINE_SHIFT: u32 = 6;
/// Page size in bytes. Fixed throughout the model.
pub const PAGE_BYTES: u64 = 4096;
/// log2 of [`PAGE_BYTES`].
pub const PAGE_SHIFT: u32 = 12;
/// Width of a physical address.
pub const PADDR_BITS: u32 = 44;

/// Line-granular address (byte address >> 6).
#[inline]
pub fn line_of(addr: u64) -> u64 {
    addr >> LINE_SHIFT
}

pub use cache::{AccessOutcome, CacheGeometry, Hierarchy, HierarchyConfig, LevelHit};
pub use config::RunConfig;
pub use garibaldi::{Garibaldi, GaribaldiConfig};
pub use metrics::SimReport;
pub use replacement::PolicySpec;
pub use sim::{simulate, SimConfig, SimRun};
pub use trace::{AccessKind, MemoryAccess, TraceGenConfig};
