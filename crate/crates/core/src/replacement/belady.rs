//! Belady's MIN with bypass, driven by a precomputed index of future uses.

use std::collections::HashMap;
use std::sync::Arc;

use super::{ReplacementPolicy, Request, WayView};
use crate::cache::CacheGeometry;

const NEVER: u64 = u64::MAX;

/// Positions at which each line appears in a demand stream.
#[derive(Clone, Debug, Default)]
pub struct FutureIndex {
    positions: HashMap<u64, Vec<u64>>,
    len: u64,
}

impl FutureIndex {
    pub fn from_lines(lines: impl IntoIterator<Item = u64>) -> Self {
        let mut positions: HashMap<u64, Vec<u64>> = HashMap::new();
        let mut len = 0;
        for (i, line) in lines.into_iter().enumerate() {
            positions.entry(line).or_default().push(i as u64);
            len = i as u64 + 1;
        }
        FutureIndex { positions, len }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// First position strictly after `after` at which `line` is used.
    pub fn next_use(&self, line: u64, after: u64) -> u64 {
        let Some(p) = self.positions.get(&line) else { return NEVER };
        let i = p.partition_point(|&x| x <= after);
        p.get(i).copied().unwrap_or(NEVER)
    }
}

/// Online MIN. Access `i` of the cache must be element `i` of the index.
pub struct BeladyPolicy {
    assoc: usize,
    future: Arc<FutureIndex>,
    next: Vec<u64>,
    now: u64,
    started: bool,
}

impl BeladyPolicy {
    pub fn new(geom: CacheGeometry, future: FutureIndex) -> Self {
        BeladyPolicy {
            assoc: geom.associativity,
            future: Arc::new(future),
            next: vec![NEVER; geom.n_sets() * geom.associativity],
            now: 0,
            started: false,
        }
    }

    fn stamp(&mut self, set: usize, way: usize, line: u64) {
        self.next[set * self.assoc + way] = self.future.next_use(line, self.now);
    }
}

impl ReplacementPolicy for BeladyPolicy {
    fn name(&self) -> String {
        "belady".into()
    }

    fn on_access(&mut self, _set: usize, _req: &Request, _hit: bool) {
        if self.started {
            self.now += 1;
        }
        self.started = true;
    }

    fn on_hit(&mut self, set: usize, way: usize, req: &Request) {
        self.stamp(set, way, req.line);
    }

    fn on_fill(&mut self, set: usize, way: usize, req: &Request) {
        self.stamp(set, way, req.line);
    }

    fn victim_order(&mut self, set: usize, _req: &Request, _ways: &[WayView]) -> Vec<usize> {
        let next = &self.next[set * self.assoc..(set + 1) * self.assoc];
        let mut order: Vec<usize> = (0..self.assoc).collect();
        order.sort_by_key(|&w| std::cmp::Reverse(next[w]));
        order
    }

    fn promote(&mut self, _set: usize, _way: usize) {}

    fn bypass(&mut self, set: usize, req: &Request, _ways: &[WayView]) -> bool {
        let incoming = self.future.next_use(req.line, self.now);
        let furthest = self.next[set * self.assoc..(set + 1) * self.assoc].iter().copied().max().unwrap_or(0);
        incoming >= furthest
    }
}

/// What MIN does at one access of the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillDecision {
    Hit,
    /// Installed into a free way.
    Fill,
    /// Installed after evicting the given line.
    Evict(u64),
    Bypass,
}

impl FillDecision {
    pub fn is_hit(self) -> bool {
        self == FillDecision::Hit
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BeladyAnnotation {
    pub decisions: Vec<FillDecision>,
    pub misses: u64,
}

impl BeladyAnnotation {
    pub fn hits(&self) -> u64 {
        self.decisions.len() as u64 - self.misses
    }
}

/// Resumable MIN state over a fixed stream.
#[derive(Clone, Debug)]
pub struct BeladyAnnotator {
    geom: CacheGeometry,
    future: Arc<FutureIndex>,
    ways: Vec<Option<(u64, u64)>>,
    pos: u64,
}

impl BeladyAnnotator {
    pub fn new(geom: CacheGeometry, future: Arc<FutureIndex>) -> Self {
        BeladyAnnotator { geom, future, ways: vec![None; geom.n_sets() * geom.associativity], pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    /// Processes the next element of the stream, which must be `line`.
    pub fn step(&mut self, line: u64) -> FillDecision {
        let assoc = self.geom.associativity;
        let set = self.geom.set_of(line);
        let now = self.pos;
        self.pos += 1;
        let next = self.future.next_use(line, now);
        let ways = &mut self.ways[set * assoc..(set + 1) * assoc];
        if let Some(slot) = ways.iter_mut().flatten().find(|(l, _)| *l == line) {
            slot.1 = next;
            return FillDecision::Hit;
        }
        if let Some(slot) = ways.iter_mut().find(|w| w.is_none()) {
            *slot = Some((line, next));
            return FillDecision::Fill;
        }
        let (victim, &(vline, vnext)) = ways
            .iter()
            .enumerate()
            .map(|(i, w)| (i, w.as_ref().expect("full set")))
            .max_by_key(|(i, w)| (w.1, std::cmp::Reverse(*i)))
            .expect("non-empty set");
        if next >= vnext {
            return FillDecision::Bypass;
        }
        ways[victim] = Some((line, next));
        FillDecision::Evict(vline)
    }
}

/// Labels every access of `lines` with MIN's decision for the given geometry.
pub fn belady_annotate(lines: &[u64], geom: CacheGeometry) -> BeladyAnnotation {
    let future = Arc::new(FutureIndex::from_lines(lines.iter().copied()));
    let mut ann = BeladyAnnotator::new(geom, future);
    let decisions: Vec<FillDecision> = lines.iter().map(|&l| ann.step(l)).collect();
    let misses = decisions.iter().filter(|d| !d.is_hit()).count() as u64;
    BeladyAnnotation { decisions, misses }
}

#[cfg(test)]
mod tests {
    use super::super::testing::MiniCache;
    use super::super::LruPolicy;
    use super::*;
    use proptest::prelude::*;

    /// Minimum misses over every eviction/bypass choice (single set).
    fn brute_force_min(trace: &[u64], assoc: usize) -> u64 {
        fn go(trace: &[u64], resident: &mut Vec<u64>, assoc: usize) -> u64 {
            let Some((&line, rest)) = trace.split_first() else { return 0 };
            if resident.contains(&line) {
                return go(rest, resident, assoc);
            }
            if resident.len() < assoc {
                resident.push(line);
                let m = 1 + go(rest, resident, assoc);
                resident.pop();
                return m;
            }
            let mut best = 1 + go(rest, resident, assoc);
            for i in 0..resident.len() {
                let old = std::mem::replace(&mut resident[i], line);
                best = best.min(1 + go(rest, resident, assoc));
                resident[i] = old;
            }
            best
        }
        go(trace, &mut Vec::new(), assoc)
    }

    #[test]
    fn five_access_example_takes_three_misses() {
        let (a, b, c) = (1, 2, 3);
        let trace = [a, b, c, a, b];
        let geom = CacheGeometry::new(2 * 64, 2).unwrap();
        assert_eq!(brute_force_min(&trace, 2), 3);
        let ann = belady_annotate(&trace, geom);
        assert_eq!(ann.misses, 3);
        assert_eq!(ann.decisions[2], FillDecision::Bypass);
    }

    #[test]
    fn working_set_within_associativity_has_only_cold_misses() {
        let geom = CacheGeometry::new(8 * 4 * 64, 4).unwrap();
        let lines: Vec<u64> = (0..50).flat_map(|_| 0..32u64).collect();
        assert_eq!(belady_annotate(&lines, geom).misses, 32);
    }

    #[test]
    fn online_policy_matches_annotation() {
        let geom = CacheGeometry::new(4 * 4 * 64, 4).unwrap();
        let lines: Vec<u64> = (0..3000u64).map(|i| ((i * 7919) % 97) ^ ((i / 13) % 5)).collect();
        let ann = belady_annotate(&lines, geom);
        let mut c = MiniCache::new(geom, Box::new(BeladyPolicy::new(geom, FutureIndex::from_lines(lines.clone()))));
        for (i, &l) in lines.iter().enumerate() {
            assert_eq!(c.access(l, 0, false), ann.decisions[i].is_hit(), "access {i}");
        }
        assert_eq!(c.misses, ann.misses);
    }

    #[test]
    fn next_use_is_strictly_after() {
        let f = FutureIndex::from_lines([5, 6, 5, 7]);
        assert_eq!(f.next_use(5, 0), 2);
        assert_eq!(f.next_use(5, 2), NEVER);
        assert_eq!(f.next_use(9, 0), NEVER);
        assert_eq!(f.len(), 4);
    }

    proptest! {
        #[test]
        fn equals_exhaustive_minimum(trace in prop::collection::vec(0u64..5, 0..10)) {
            let geom = CacheGeometry::new(2 * 64, 2).unwrap();
            prop_assert_eq!(belady_annotate(&trace, geom).misses, brute_force_min(&trace, 2));
        }

        #[test]
        fn never_worse_than_lru(trace in prop::collection::vec(0u64..64, 0..400)) {
            let geom = CacheGeometry::new(4 * 4 * 64, 4).unwrap();
            let mut lru = MiniCache::new(geom, Box::new(LruPolicy::new(geom)));
            for &l in &trace {
                lru.access(l, 0, false);
            }
            prop_assert!(belady_annotate(&trace, geom).misses <= lru.misses);
        }

        #[test]
        fn resuming_from_checkpoint_gives_same_labels(
            trace in prop::collection::vec(0u64..40, 1..300),
            cut in 0usize..300,
        ) {
            let geom = CacheGeometry::new(2 * 4 * 64, 4).unwrap();
            let whole = belady_annotate(&trace, geom);
            let cut = cut % trace.len();
            let future = Arc::new(FutureIndex::from_lines(trace.iter().copied()));
            let mut first = BeladyAnnotator::new(geom, future);
            let mut labels: Vec<FillDecision> = trace[..cut].iter().map(|&l| first.step(l)).collect();
            let mut resumed = first.clone();
            prop_assert_eq!(resumed.position(), cut as u64);
            labels.extend(trace[cut..].iter().map(|&l| resumed.step(l)));
            prop_assert_eq!(labels, whole.decisions);
        }
    }
}
