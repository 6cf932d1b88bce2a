use super::CacheGeometry;

const EMPTY: u64 = u64::MAX;

/// Per-core LRU filter cache with write-back dirty bits.
#[derive(Clone, Debug)]
pub struct PrivateCache {
    geom: CacheGeometry,
    tags: Vec<u64>,
    stamps: Vec<u64>,
    dirty: Vec<bool>,
    clock: u64,
}

impl PrivateCache {
    pub fn new(geom: CacheGeometry) -> Self {
        let n = geom.n_sets() * geom.associativity;
        PrivateCache { geom, tags: vec![EMPTY; n], stamps: vec![0; n], dirty: vec![false; n], clock: 0 }
    }

    fn range(&self, line: u64) -> std::ops::Range<usize> {
        let base = self.geom.set_of(line) * self.geom.associativity;
        base..base + self.geom.associativity
    }

    pub fn contains(&self, line: u64) -> bool {
        self.tags[self.range(line)].contains(&line)
    }

    /// Looks up `line`, refreshing recency on a hit.
    pub fn access(&mut self, line: u64, is_store: bool) -> bool {
        self.clock += 1;
        let r = self.range(line);
        match self.tags[r.clone()].iter().position(|&t| t == line) {
            Some(w) => {
                self.stamps[r.start + w] = self.clock;
                self.dirty[r.start + w] |= is_store;
                true
            }
            None => false,
        }
    }

    /// Installs `line`, returning the displaced (line, dirty) if any.
    pub fn fill(&mut self, line: u64, dirty: bool) -> Option<(u64, bool)> {
        self.clock += 1;
        let r = self.range(line);
        let w = match self.tags[r.clone()].iter().position(|&t| t == EMPTY) {
            Some(w) => r.start + w,
            None => r.clone().min_by_key(|&i| self.stamps[i]).expect("non-empty set"),
        };
        let victim = (self.tags[w] != EMPTY).then(|| (self.tags[w], self.dirty[w]));
        self.tags[w] = line;
        self.stamps[w] = self.clock;
        self.dirty[w] = dirty;
        victim
    }
}
