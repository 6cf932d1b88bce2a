//! Per-set stack distances: how many distinct other lines of the same LLC
//! set were touched between two touches of a line.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cache::CacheGeometry;

#[derive(Clone, Debug, Default)]
struct ClassReuse {
    hist: BTreeMap<u64, u64>,
    first_touch: u64,
    per_line: BTreeMap<u64, (u64, u64)>,
}

#[derive(Clone, Debug)]
pub struct ReuseProfiler {
    geom: CacheGeometry,
    stacks: Vec<Vec<u64>>,
    classes: [ClassReuse; 2],
}

/// Summary for one access class. `log2_buckets[0]` counts distance 0 and
/// `log2_buckets[b]` counts distances in `[2^(b-1), 2^b)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReuseClassSummary {
    pub accesses: u64,
    pub first_touch: u64,
    pub mean_per_line: Option<f64>,
    pub mean_weighted: Option<f64>,
    pub log2_buckets: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReuseSummary {
    pub instruction: ReuseClassSummary,
    pub data: ReuseClassSummary,
}

impl ReuseProfiler {
    pub fn new(geom: CacheGeometry) -> Self {
        ReuseProfiler { geom, stacks: vec![Vec::new(); geom.n_sets()], classes: Default::default() }
    }

    /// Records a touch; returns its distance, or None on first touch.
    pub fn record(&mut self, line: u64, is_instruction: bool) -> Option<u64> {
        let stack = &mut self.stacks[self.geom.set_of(line)];
        let pos = stack.iter().rev().position(|&l| l == line);
        let class = &mut self.classes[usize::from(is_instruction)];
        match pos {
            Some(d) => {
                let idx = stack.len() - 1 - d;
                stack.remove(idx);
                stack.push(line);
                let d = d as u64;
                *class.hist.entry(d).or_default() += 1;
                let e = class.per_line.entry(line).or_default();
                e.0 += d;
                e.1 += 1;
                Some(d)
            }
            None => {
                stack.push(line);
                class.first_touch += 1;
                None
            }
        }
    }

    /// Full histogram of finite distances for one class.
    pub fn histogram(&self, is_instruction: bool) -> &BTreeMap<u64, u64> {
        &self.classes[usize::from(is_instruction)].hist
    }

    pub fn summary(&self) -> ReuseSummary {
        let one = |c: &ClassReuse| {
            let reuses: u64 = c.hist.values().sum();
            let total: u64 = c.hist.iter().map(|(d, n)| d * n).sum();
            let mut buckets = Vec::new();
            for (&d, &n) in &c.hist {
                let b = (64 - d.leading_zeros()) as usize;
                if buckets.len() <= b {
                    buckets.resize(b + 1, 0);
                }
                buckets[b] += n;
            }
            let mean_per_line = (!c.per_line.is_empty()).then(|| {
                c.per_line.values().map(|&(s, n)| s as f64 / n as f64).sum::<f64>() / c.per_line.len() as f64
            });
            ReuseClassSummary {
                accesses: reuses + c.first_touch,
                first_touch: c.first_touch,
                mean_per_line,
                mean_weighted: (reuses > 0).then(|| total as f64 / reuses as f64),
                log2_buckets: buckets,
            }
        };
        ReuseSummary { instruction: one(&self.classes[1]), data: one(&self.classes[0]) }
    }
}
