//! LLC replacement policies.
//!
//! A policy owns all of its per-line metadata, indexed by `(set, way)`. The
//! cache tells it about demand accesses, hits, fills and evictions, and asks
//! it for an ordered list of eviction candidates when a set is full. The
//! ordering is what lets the protection layer veto instruction candidates
//! and fall through to the next one.

mod belady;
mod drrip;
mod hawkeye;
mod lru;
mod mockingjay;
mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::CacheGeometry;

pub use belady::{belady_annotate, BeladyAnnotation, BeladyAnnotator, BeladyPolicy, FillDecision, FutureIndex};
pub use drrip::{DrripParams, DrripPolicy};
pub use hawkeye::{HawkeyeParams, HawkeyePolicy};
pub use lru::LruPolicy;
pub use mockingjay::{MockingjayParams, MockingjayPolicy};
pub use oracle::IOracle;

/// A request as seen by a replacement policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Request {
    pub core: u8,
    pub pc: u64,
    /// Line address (byte address >> 6).
    pub line: u64,
    pub is_instruction: bool,
    pub is_prefetch: bool,
}

/// What a policy may know about a resident line when ordering victims.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WayView {
    pub line: u64,
    pub is_instruction: bool,
}

pub trait ReplacementPolicy: Send {
    fn name(&self) -> String;

    /// Every demand access to the cache, before `on_hit` / `on_fill`.
    fn on_access(&mut self, _set: usize, _req: &Request, _hit: bool) {}

    fn on_hit(&mut self, set: usize, way: usize, req: &Request);

    /// A line was installed in `way`. `req.is_prefetch` marks prefetch fills,
    /// which every policy inserts at lower retention than demand fills.
    fn on_fill(&mut self, set: usize, way: usize, req: &Request);

    /// Ways of a full set, best victim first. Must be a permutation of
    /// `0..ways.len()`.
    fn victim_order(&mut self, set: usize, req: &Request, ways: &[WayView]) -> Vec<usize>;

    fn on_evict(&mut self, _set: usize, _way: usize) {}

    /// Reset the eviction priority of a line to the lowest level.
    fn promote(&mut self, set: usize, way: usize);

    /// True if the incoming line should not be inserted at all.
    fn bypass(&mut self, _set: usize, _req: &Request, _ways: &[WayView]) -> bool {
        false
    }

    /// True if a demand request must be served as a hit even when absent.
    fn force_hit(&self, _req: &Request) -> bool {
        false
    }
}

/// Policy selection by name: `lru`, `drrip`, `hawkeye`, `mockingjay`,
/// `belady` or `i-oracle:<inner>`.
#[derive(Clone, Debug, PartialEq, Eq)]
#[derive(Default)]
pub enum PolicySpec {
    #[default]
    Lru,
    Drrip,
    Hawkeye,
    Mockingjay,
    Belady,
    IOracle(Box<PolicySpec>),
}


pub const POLICY_NAMES: &str = "lru | drrip | hawkeye | mockingjay | belady | i-oracle:<inner>";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown policy `{name}` (valid: {POLICY_NAMES})")]
pub struct UnknownPolicy {
    pub name: String,
}

impl FromStr for PolicySpec {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || UnknownPolicy { name: s.to_string() };
        Ok(match s {
            "lru" => PolicySpec::Lru,
            "drrip" => PolicySpec::Drrip,
            "hawkeye" => PolicySpec::Hawkeye,
            "mockingjay" => PolicySpec::Mockingjay,
            "belady" => PolicySpec::Belady,
            _ => {
                let inner = s.strip_prefix("i-oracle:").ok_or_else(unknown)?;
                let inner: PolicySpec = inner.parse().map_err(|_| unknown())?;
                if matches!(inner, PolicySpec::IOracle(_)) {
                    return Err(unknown());
                }
                PolicySpec::IOracle(Box::new(inner))
            }
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Lru => f.write_str("lru"),
            PolicySpec::Drrip => f.write_str("drrip"),
            PolicySpec::Hawkeye => f.write_str("hawkeye"),
            PolicySpec::Mockingjay => f.write_str("mockingjay"),
            PolicySpec::Belady => f.write_str("belady"),
            PolicySpec::IOracle(inner) => write!(f, "i-oracle:{inner}"),
        }
    }
}

impl Serialize for PolicySpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl PolicySpec {
    pub fn needs_future(&self) -> bool {
        match self {
            PolicySpec::Belady => true,
            PolicySpec::IOracle(inner) => inner.needs_future(),
            _ => false,
        }
    }

    /// Builds an online policy. `future` is required for `belady`.
    pub fn build(&self, geom: CacheGeometry, future: Option<FutureIndex>) -> Box<dyn ReplacementPolicy> {
        match self {
            PolicySpec::Lru => Box::new(LruPolicy::new(geom)),
            PolicySpec::Drrip => Box::new(DrripPolicy::new(geom, DrripParams::default())),
            PolicySpec::Hawkeye => Box::new(HawkeyePolicy::new(geom, HawkeyeParams::default())),
            PolicySpec::Mockingjay => Box::new(MockingjayPolicy::new(geom, MockingjayParams::default())),
            PolicySpec::Belady => {
                Box::new(BeladyPolicy::new(geom, future.expect("belady requires the future demand stream")))
            }
            PolicySpec::IOracle(inner) => Box::new(IOracle::new(inner.build(geom, future))),
        }
    }
}

/// Small hash used by the PC-indexed predictors (64 B-aligned PC).
pub(crate) fn pc_signature(pc: u64, bits: u32) -> usize {
    let x = (pc >> 6).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (x >> (64 - bits)) as usize
}

/// Evenly spaced sampled sets.
pub(crate) fn sampled_mask(n_sets: usize, sampled: usize) -> Vec<bool> {
    let sampled = sampled.clamp(1, n_sets);
    let stride = n_sets / sampled;
    (0..n_sets).map(|s| s % stride == 0 && s / stride < sampled).collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in ["lru", "drrip", "hawkeye", "mockingjay", "belady", "i-oracle:lru", "i-oracle:mockingjay"] {
            let spec: PolicySpec = name.parse().unwrap();
            assert_eq!(spec.to_string(), name);
        }
    }

    #[test]
    fn unknown_policy_lists_valid_names() {
        let err = "fifo".parse::<PolicySpec>().unwrap_err();
        assert!(err.to_string().contains("lru | drrip | hawkeye | mockingjay | belady"));
        assert!("i-oracle:i-oracle:lru".parse::<PolicySpec>().is_err());
        assert!("i-oracle:".parse::<PolicySpec>().is_err());
    }

    #[test]
    fn sampled_sets_are_spread() {
        let mask = sampled_mask(1024, 64);
        assert_eq!(mask.iter().filter(|&&b| b).count(), 64);
        assert!(mask[0] && mask[16] && !mask[1]);
        assert_eq!(sampled_mask(8, 64).iter().filter(|&&b| b).count(), 8);
    }
}
