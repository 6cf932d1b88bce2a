//! Mockingjay-lite: predicts a reuse distance per PC from sampled sets and
//! evicts the line whose estimated time of reuse (ETR) is furthest away.

use std::collections::{HashMap, VecDeque};

use super::{pc_signature, sampled_mask, ReplacementPolicy, Request, WayView};
use crate::cache::CacheGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MockingjayParams {
    pub sampled_sets: usize,
    /// Signed ETR width.
    pub etr_bits: u32,
    /// Sampler history, in multiples of the associativity.
    pub history_multiplier: usize,
    pub predictor_bits: u32,
}

impl Default for MockingjayParams {
    fn default() -> Self {
        MockingjayParams { sampled_sets: 64, etr_bits: 5, history_multiplier: 8, predictor_bits: 11 }
    }
}

#[derive(Clone, Debug, Default)]
struct Sampler {
    time: u64,
    last: HashMap<u64, (u64, usize)>,
    order: VecDeque<(u64, u64)>,
}

#[derive(Clone, Debug)]
pub struct MockingjayPolicy {
    assoc: usize,
    history: u64,
    etr_max: i8,
    etr_min: i8,
    granularity: u64,
    sig_bits: u32,
    /// Predicted reuse distance in set accesses; `history + 1` means "no reuse".
    rdp: Vec<Option<u32>>,
    sampled: Vec<bool>,
    samplers: HashMap<usize, Sampler>,
    etr: Vec<i8>,
    set_clock: Vec<u64>,
}

impl MockingjayPolicy {
    pub fn new(geom: CacheGeometry, params: MockingjayParams) -> Self {
        let etr_max = ((1i32 << (params.etr_bits - 1)) - 1) as i8;
        let history = (params.history_multiplier * geom.associativity) as u64;
        MockingjayPolicy {
            assoc: geom.associativity,
            history,
            etr_max,
            etr_min: -etr_max - 1,
            granularity: (history + 1).div_ceil(etr_max as u64),
            sig_bits: params.predictor_bits,
            rdp: vec![None; 1 << params.predictor_bits],
            sampled: sampled_mask(geom.n_sets(), params.sampled_sets),
            samplers: HashMap::new(),
            etr: vec![0; geom.n_sets() * geom.associativity],
            set_clock: vec![0; geom.n_sets()],
        }
    }

    /// ETR assigned to a line inserted or hit by `pc`.
    pub fn predicted_etr(&self, pc: u64) -> i8 {
        match self.rdp[pc_signature(pc, self.sig_bits)] {
            None => self.etr_max / 2,
            Some(rd) if rd as u64 > self.history => self.etr_max,
            Some(rd) => (rd as u64).div_ceil(self.granularity).min(self.etr_max as u64) as i8,
        }
    }

    pub fn etr(&self, set: usize, way: usize) -> i8 {
        self.etr[set * self.assoc + way]
    }

    fn train(&mut self, sig: usize, observed: u32) {
        let slot = &mut self.rdp[sig];
        *slot = Some(match *slot {
            None => observed,
            Some(old) => {
                let diff = observed as i64 - old as i64;
                let step = if diff.abs() < 4 { diff.signum() } else { diff / 4 };
                (old as i64 + step) as u32
            }
        });
    }

    fn sample(&mut self, set: usize, line: u64, sig: usize) {
        let history = self.history;
        let s = self.samplers.entry(set).or_default();
        let now = s.time;
        s.time += 1;
        let mut observations = Vec::new();
        if let Some((then, old_sig)) = s.last.insert(line, (now, sig)) {
            observations.push((old_sig, (now - then) as u32));
        }
        s.order.push_back((line, now));
        while let Some(&(l, t)) = s.order.front() {
            if now - t <= history {
                break;
            }
            s.order.pop_front();
            if let Some(&(last_t, old_sig)) = s.last.get(&l) {
                if last_t == t {
                    s.last.remove(&l);
                    observations.push((old_sig, history as u32 + 1));
                }
            }
        }
        for (sig, rd) in observations {
            self.train(sig, rd);
        }
    }
}

impl ReplacementPolicy for MockingjayPolicy {
    fn name(&self) -> String {
        "mockingjay".into()
    }

    fn on_access(&mut self, set: usize, req: &Request, _hit: bool) {
        if self.sampled[set] {
            self.sample(set, req.line, pc_signature(req.pc, self.sig_bits));
        }
        self.set_clock[set] += 1;
        if self.set_clock[set].is_multiple_of(self.granularity) {
            let min = self.etr_min;
            for e in &mut self.etr[set * self.assoc..(set + 1) * self.assoc] {
                *e = (*e - 1).max(min);
            }
        }
    }

    fn on_hit(&mut self, set: usize, way: usize, req: &Request) {
        self.etr[set * self.assoc + way] = self.predicted_etr(req.pc);
    }

    fn on_fill(&mut self, set: usize, way: usize, req: &Request) {
        let etr = if req.is_prefetch { self.etr_max } else { self.predicted_etr(req.pc) };
        self.etr[set * self.assoc + way] = etr;
    }

    fn victim_order(&mut self, set: usize, _req: &Request, _ways: &[WayView]) -> Vec<usize> {
        let etr = &self.etr[set * self.assoc..(set + 1) * self.assoc];
        let mut order: Vec<usize> = (0..self.assoc).collect();
        // Furthest |ETR| first; among equals, lines already overdue go first.
        order.sort_by_key(|&w| (std::cmp::Reverse(etr[w].unsigned_abs()), etr[w] >= 0));
        order
    }

    fn promote(&mut self, set: usize, way: usize) {
        self.etr[set * self.assoc + way] = 0;
    }
}
