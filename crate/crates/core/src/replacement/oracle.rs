use std::collections::HashSet;

use super::{ReplacementPolicy, Request, WayView};

/// Wraps a policy so that every instruction line, once filled, keeps hitting.
/// The pin is virtual: later fetches are served as hits whether or not the
/// line is still resident, so resident instruction copies are offered for
/// eviction first and never take capacity from data.
pub struct IOracle {
    inner: Box<dyn ReplacementPolicy>,
    pinned: HashSet<u64>,
}

impl IOracle {
    pub fn new(inner: Box<dyn ReplacementPolicy>) -> Self {
        IOracle { inner, pinned: HashSet::new() }
    }
}

impl ReplacementPolicy for IOracle {
    fn name(&self) -> String {
        format!("i-oracle:{}", self.inner.name())
    }

    fn on_access(&mut self, set: usize, req: &Request, hit: bool) {
        self.inner.on_access(set, req, hit);
    }

    fn on_hit(&mut self, set: usize, way: usize, req: &Request) {
        self.inner.on_hit(set, way, req);
    }

    fn on_fill(&mut self, set: usize, way: usize, req: &Request) {
        if req.is_instruction && !req.is_prefetch {
            self.pinned.insert(req.line);
        }
        self.inner.on_fill(set, way, req);
    }

    fn victim_order(&mut self, set: usize, req: &Request, ways: &[WayView]) -> Vec<usize> {
        let mut order = self.inner.victim_order(set, req, ways);
        if !ways.is_empty() {
            order.sort_by_key(|&w| !ways[w].is_instruction);
        }
        order
    }

    fn on_evict(&mut self, set: usize, way: usize) {
        self.inner.on_evict(set, way);
    }

    fn promote(&mut self, set: usize, way: usize) {
        self.inner.promote(set, way);
    }

    fn bypass(&mut self, set: usize, req: &Request, ways: &[WayView]) -> bool {
        self.inner.bypass(set, req, ways)
    }

    fn force_hit(&self, req: &Request) -> bool {
        req.is_instruction && !req.is_prefetch && self.pinned.contains(&req.line)
    }
}
