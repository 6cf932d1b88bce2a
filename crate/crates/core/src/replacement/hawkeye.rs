//! Hawkeye-lite: a PC-indexed cache-friendly/cache-averse predictor trained
//! by an OPTgen occupancy-vector simulation over sampled sets.

use std::collections::{HashMap, VecDeque};

use super::{pc_signature, sampled_mask, ReplacementPolicy, Request, WayView};
use crate::cache::CacheGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HawkeyeParams {
    pub sampled_sets: usize,
    /// OPTgen history length, in multiples of the associativity.
    pub history_multiplier: usize,
    pub rrpv_bits: u32,
    pub predictor_bits: u32,
}

impl Default for HawkeyeParams {
    fn default() -> Self {
        HawkeyeParams { sampled_sets: 64, history_multiplier: 8, rrpv_bits: 5, predictor_bits: 11 }
    }
}

const COUNTER_MAX: u8 = 7;
const FRIENDLY_AT: u8 = 4;

#[derive(Clone, Debug, Default)]
struct OptGen {
    time: u64,
    occupancy: Vec<u8>,
    last: HashMap<u64, (u64, usize)>,
    order: VecDeque<(u64, u64)>,
}

#[derive(Clone, Copy, Debug, Default)]
struct LineMeta {
    rrpv: u8,
    sig: usize,
}

#[derive(Clone, Debug)]
pub struct HawkeyePolicy {
    assoc: usize,
    history: usize,
    max_rrpv: u8,
    sig_bits: u32,
    predictor: Vec<u8>,
    sampled: Vec<bool>,
    optgen: HashMap<usize, OptGen>,
    lines: Vec<LineMeta>,
}

impl HawkeyePolicy {
    pub fn new(geom: CacheGeometry, params: HawkeyeParams) -> Self {
        let max_rrpv = ((1u32 << params.rrpv_bits) - 1) as u8;
        HawkeyePolicy {
            assoc: geom.associativity,
            history: params.history_multiplier * geom.associativity,
            max_rrpv,
            sig_bits: params.predictor_bits,
            predictor: vec![FRIENDLY_AT; 1 << params.predictor_bits],
            sampled: sampled_mask(geom.n_sets(), params.sampled_sets),
            optgen: HashMap::new(),
            lines: vec![LineMeta { rrpv: max_rrpv, sig: 0 }; geom.n_sets() * geom.associativity],
        }
    }

    /// Confidence counter (0..=7) of the predictor entry for `pc`.
    pub fn confidence(&self, pc: u64) -> u8 {
        self.predictor[pc_signature(pc, self.sig_bits)]
    }

    pub fn predicts_friendly(&self, pc: u64) -> bool {
        self.confidence(pc) >= FRIENDLY_AT
    }

    fn train(&mut self, sig: usize, friendly: bool) {
        let c = &mut self.predictor[sig];
        *c = if friendly { (*c + 1).min(COUNTER_MAX) } else { c.saturating_sub(1) };
    }

    fn optgen_step(&mut self, set: usize, line: u64, sig: usize) {
        let (assoc, history) = (self.assoc, self.history);
        let og = self.optgen.entry(set).or_insert_with(|| OptGen { occupancy: vec![0; history], ..OptGen::default() });
        let now = og.time;
        og.occupancy[now as usize % history] = 0;
        let mut verdict = None;
        if let Some(&(then, old_sig)) = og.last.get(&line) {
            let fits = now - then < history as u64
                && (then..now).all(|t| (og.occupancy[t as usize % history] as usize) < assoc);
            if fits {
                for t in then..now {
                    og.occupancy[t as usize % history] += 1;
                }
            }
            verdict = Some((old_sig, fits));
        }
        og.last.insert(line, (now, sig));
        og.order.push_back((line, now));
        let mut expired = Vec::new();
        while let Some(&(l, t)) = og.order.front() {
            if now - t < history as u64 {
                break;
            }
            og.order.pop_front();
            if let Some(&(last_t, s)) = og.last.get(&l) {
                if last_t == t {
                    og.last.remove(&l);
                    expired.push(s);
                }
            }
        }
        og.time += 1;
        if let Some((s, fits)) = verdict {
            self.train(s, fits);
        }
        for s in expired {
            self.train(s, false);
        }
    }

    fn meta(&mut self, set: usize, way: usize) -> &mut LineMeta {
        &mut self.lines[set * self.assoc + way]
    }
}

impl ReplacementPolicy for HawkeyePolicy {
    fn name(&self) -> String {
        "hawkeye".into()
    }

    fn on_access(&mut self, set: usize, req: &Request, _hit: bool) {
        if self.sampled[set] {
            let sig = pc_signature(req.pc, self.sig_bits);
            self.optgen_step(set, req.line, sig);
        }
    }

    fn on_hit(&mut self, set: usize, way: usize, req: &Request) {
        let sig = pc_signature(req.pc, self.sig_bits);
        let rrpv = if self.predictor[sig] >= FRIENDLY_AT { 0 } else { self.max_rrpv };
        *self.meta(set, way) = LineMeta { rrpv, sig };
    }

    fn on_fill(&mut self, set: usize, way: usize, req: &Request) {
        let sig = pc_signature(req.pc, self.sig_bits);
        let max = self.max_rrpv;
        if req.is_prefetch || self.predictor[sig] < FRIENDLY_AT {
            *self.meta(set, way) = LineMeta { rrpv: max, sig };
            return;
        }
        let base = set * self.assoc;
        for (w, m) in self.lines[base..base + self.assoc].iter_mut().enumerate() {
            if w != way && m.rrpv < max - 1 {
                m.rrpv += 1;
            }
        }
        *self.meta(set, way) = LineMeta { rrpv: 0, sig };
    }

    fn victim_order(&mut self, set: usize, _req: &Request, _ways: &[WayView]) -> Vec<usize> {
        let base = set * self.assoc;
        let lines = &self.lines[base..base + self.assoc];
        let mut order: Vec<usize> = (0..self.assoc).collect();
        order.sort_by_key(|&w| std::cmp::Reverse(lines[w].rrpv));
        order
    }

    fn on_evict(&mut self, set: usize, way: usize) {
        let m = *self.meta(set, way);
        // Evicting a line predicted friendly means the predictor was wrong.
        if m.rrpv < self.max_rrpv {
            self.train(m.sig, false);
        }
    }

    fn promote(&mut self, set: usize, way: usize) {
        self.meta(set, way).rrpv = 0;
    }
}
