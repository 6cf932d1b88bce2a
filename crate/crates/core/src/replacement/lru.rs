use super::{ReplacementPolicy, Request, WayView};
use crate::cache::CacheGeometry;

/// True LRU kept as a per-set recency stack (index 0 is MRU).
#[derive(Clone, Debug)]
pub struct LruPolicy {
    assoc: usize,
    stacks: Vec<u16>,
}

impl LruPolicy {
    pub fn new(geom: CacheGeometry) -> Self {
        let assoc = geom.associativity;
        let stacks = (0..geom.n_sets()).flat_map(|_| 0..assoc as u16).collect();
        LruPolicy { assoc, stacks }
    }

    fn stack(&mut self, set: usize) -> &mut [u16] {
        &mut self.stacks[set * self.assoc..(set + 1) * self.assoc]
    }

    fn move_to(&mut self, set: usize, way: usize, pos: usize) {
        let stack = self.stack(set);
        let from = stack.iter().position(|&w| w as usize == way).expect("way in stack");
        if from < pos {
            stack[from..=pos].rotate_left(1);
        } else {
            stack[pos..=from].rotate_right(1);
        }
    }

    /// Ways from LRU to MRU.
    pub fn lru_order(&self, set: usize) -> impl Iterator<Item = usize> + '_ {
        self.stacks[set * self.assoc..(set + 1) * self.assoc].iter().rev().map(|&w| w as usize)
    }
}

impl ReplacementPolicy for LruPolicy {
    fn name(&self) -> String {
        "lru".into()
    }

    fn on_hit(&mut self, set: usize, way: usize, _req: &Request) {
        self.move_to(set, way, 0);
    }

    fn on_fill(&mut self, set: usize, way: usize, req: &Request) {
        // Prefetches go one above the LRU position.
        let pos = if req.is_prefetch { self.assoc.saturating_sub(2) } else { 0 };
        self.move_to(set, way, pos);
    }

    fn victim_order(&mut self, set: usize, _req: &Request, _ways: &[WayView]) -> Vec<usize> {
        self.lru_order(set).collect()
    }

    fn promote(&mut self, set: usize, way: usize) {
        self.move_to(set, way, 0);
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::MiniCache;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn textbook_recency_order() {
        let geom = CacheGeometry::new(4 * 64, 4).unwrap();
        let mut c = MiniCache::new(geom, Box::new(LruPolicy::new(geom)));
        for line in [0xA, 0xB, 0xC, 0xD] {
            assert!(!c.access(line, 0, false));
        }
        assert!(c.access(0xA, 0, false));
        assert!(!c.access(0xE, 0, false));
        assert_eq!(c.last_victim, Some(0xB));
    }

    #[test]
    fn prefetch_fill_lands_above_lru() {
        let geom = CacheGeometry::new(4 * 64, 4).unwrap();
        let mut lru = LruPolicy::new(geom);
        let demand = Request { core: 0, pc: 0, line: 0, is_instruction: false, is_prefetch: false };
        for w in 0..4 {
            lru.on_fill(0, w, &demand);
        }
        lru.on_fill(0, 3, &Request { is_prefetch: true, ..demand });
        assert_eq!(lru.lru_order(0).collect::<Vec<_>>(), vec![0, 3, 1, 2]);
    }

    /// Victim selection equals a brute-force scan for the oldest timestamp.
    #[test]
    fn matches_timestamp_oracle() {
        let geom = CacheGeometry::new(16 * 8 * 64, 8).unwrap();
        let mut c = MiniCache::new(geom, Box::new(LruPolicy::new(geom)));
        let mut stamps: Vec<Option<(u64, u64)>> = vec![None; geom.n_sets() * 8];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for now in 0..10_000u64 {
            let line = rng.gen_range(0..400u64);
            let set = geom.set_of(line);
            let slots = &mut stamps[set * 8..set * 8 + 8];
            let hit = slots.iter().position(|s| s.map(|s| s.0) == Some(line));
            let expected_victim = if hit.is_none() && slots.iter().all(Option::is_some) {
                let oldest = (0..8).min_by_key(|&w| slots[w].unwrap().1).unwrap();
                Some(slots[oldest].unwrap().0)
            } else {
                None
            };
            assert_eq!(c.access(line, 0, false), hit.is_some());
            assert_eq!(c.last_victim, expected_victim, "op {now}");
            let w = hit
                .or_else(|| slots.iter().position(Option::is_none))
                .unwrap_or_else(|| slots.iter().position(|s| s.map(|s| s.0) == expected_victim).unwrap());
            slots[w] = Some((line, now));
        }
    }
}
