//! Set-associative caches and the private + shared LLC hierarchy.

mod events;
mod hierarchy;
mod private;
mod stall;

use thiserror::Error;

pub use events::{parse_event_line, Event};
pub use hierarchy::{ClassStats, Hierarchy, HierarchyConfig, HierarchyStats, Latencies};
pub use private::PrivateCache;
pub use stall::{estimate_stalls, StallEstimate, StallEstimator, StallEvent};

use crate::LINE_BYTES;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("associativity must be positive")]
    ZeroAssociativity,
    #[error("capacity {capacity} B is not a multiple of {assoc} ways x 64 B")]
    NotMultiple { capacity: u64, assoc: usize },
    #[error("capacity {capacity} B with {assoc} ways gives {sets} sets, which is not a power of two")]
    SetsNotPowerOfTwo { capacity: u64, assoc: usize, sets: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheGeometry {
    pub capacity_bytes: u64,
    pub associativity: usize,
    n_sets: usize,
}

impl CacheGeometry {
    pub fn new(capacity_bytes: u64, associativity: usize) -> Result<Self, GeometryError> {
        if associativity == 0 {
            return Err(GeometryError::ZeroAssociativity);
        }
        let way_bytes = associativity as u64 * LINE_BYTES;
        if capacity_bytes == 0 || !capacity_bytes.is_multiple_of(way_bytes) {
            return Err(GeometryError::NotMultiple { capacity: capacity_bytes, assoc: associativity });
        }
        let sets = capacity_bytes / way_bytes;
        if !sets.is_power_of_two() {
            return Err(GeometryError::SetsNotPowerOfTwo { capacity: capacity_bytes, assoc: associativity, sets });
        }
        Ok(CacheGeometry { capacity_bytes, associativity, n_sets: sets as usize })
    }

    pub fn n_sets(&self) -> usize {
        self.n_sets
    }

    pub fn set_of(&self, line: u64) -> usize {
        (line as usize) & (self.n_sets - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelHit {
    Private,
    Llc,
    Memory,
}

impl LevelHit {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelHit::Private => "private",
            LevelHit::Llc => "llc",
            LevelHit::Memory => "memory",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "private" => LevelHit::Private,
            "llc" => LevelHit::Llc,
            "memory" => LevelHit::Memory,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessOutcome {
    pub level_hit: LevelHit,
    pub latency_cycles: u64,
    /// LLC victim as (byte address, is_instruction).
    pub evicted: Option<(u64, bool)>,
    /// Byte addresses of pairwise prefetches sent to memory.
    pub prefetches_issued: Vec<u64>,
    /// For data accesses reaching the LLC: the instruction line the shadow
    /// helper table attributes them to.
    pub paired_il: Option<u64>,
    pub qbs_queries: u32,
    pub protections: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_rules() {
        let g = CacheGeometry::new(1536 * 1024, 12).unwrap();
        assert_eq!(g.n_sets(), 2048);
        assert_eq!(g.set_of(2048 + 5), 5);
        assert!(matches!(CacheGeometry::new(1000, 4), Err(GeometryError::NotMultiple { .. })));
        assert!(matches!(CacheGeometry::new(3 * 4 * 64, 4), Err(GeometryError::SetsNotPowerOfTwo { .. })));
        assert_eq!(CacheGeometry::new(64, 0), Err(GeometryError::ZeroAssociativity));
    }
}
