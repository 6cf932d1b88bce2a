use super::{ReplacementPolicy, Request, WayView};
use crate::cache::CacheGeometry;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrripParams {
    pub rrpv_bits: u32,
    /// Fraction of BRRIP insertions placed at "long" rather than "distant".
    pub bimodal_epsilon: f64,
    /// Leader sets per insertion policy.
    pub n_leader_sets: usize,
    pub psel_bits: u32,
}

impl Default for DrripParams {
    fn default() -> Self {
        DrripParams { rrpv_bits: 5, bimodal_epsilon: 1.0 / 32.0, n_leader_sets: 32, psel_bits: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SetRole {
    SrripLeader,
    BrripLeader,
    Follower,
}

/// Dynamic RRIP with set dueling between SRRIP and BRRIP leader sets.
#[derive(Clone, Debug)]
pub struct DrripPolicy {
    assoc: usize,
    max_rrpv: u8,
    rrpv: Vec<u8>,
    roles: Vec<SetRole>,
    psel: u32,
    psel_max: u32,
    bimodal_period: u64,
    brrip_fills: u64,
    leader_misses: [u64; 2],
}

impl DrripPolicy {
    pub fn new(geom: CacheGeometry, params: DrripParams) -> Self {
        let n_sets = geom.n_sets();
        let stride = (n_sets / params.n_leader_sets.max(1)).max(2);
        let roles = (0..n_sets)
            .map(|s| match s % stride {
                0 => SetRole::SrripLeader,
                1 => SetRole::BrripLeader,
                _ => SetRole::Follower,
            })
            .collect();
        let max_rrpv = ((1u32 << params.rrpv_bits) - 1) as u8;
        let psel_max = (1 << params.psel_bits) - 1;
        DrripPolicy {
            assoc: geom.associativity,
            max_rrpv,
            rrpv: vec![max_rrpv; n_sets * geom.associativity],
            roles,
            psel: psel_max / 2,
            psel_max,
            bimodal_period: (1.0 / params.bimodal_epsilon).round().max(1.0) as u64,
            brrip_fills: 0,
            leader_misses: [0; 2],
        }
    }

    /// Demand misses taken by (SRRIP leaders, BRRIP leaders).
    pub fn leader_misses(&self) -> (u64, u64) {
        (self.leader_misses[0], self.leader_misses[1])
    }

    fn uses_brrip(&self, set: usize) -> bool {
        match self.roles[set] {
            SetRole::SrripLeader => false,
            SetRole::BrripLeader => true,
            SetRole::Follower => self.psel > self.psel_max / 2,
        }
    }
}

impl ReplacementPolicy for DrripPolicy {
    fn name(&self) -> String {
        "drrip".into()
    }

    fn on_access(&mut self, set: usize, _req: &Request, hit: bool) {
        if hit {
            return;
        }
        match self.roles[set] {
            SetRole::SrripLeader => {
                self.leader_misses[0] += 1;
                self.psel = (self.psel + 1).min(self.psel_max);
            }
            SetRole::BrripLeader => {
                self.leader_misses[1] += 1;
                self.psel = self.psel.saturating_sub(1);
            }
            SetRole::Follower => {}
        }
    }

    fn on_hit(&mut self, set: usize, way: usize, _req: &Request) {
        self.rrpv[set * self.assoc + way] = 0;
    }

    fn on_fill(&mut self, set: usize, way: usize, req: &Request) {
        let long = self.max_rrpv - 1;
        let value = if req.is_prefetch {
            self.max_rrpv
        } else if self.uses_brrip(set) {
            self.brrip_fills += 1;
            if self.brrip_fills.is_multiple_of(self.bimodal_period) {
                long
            } else {
                self.max_rrpv
            }
        } else {
            long
        };
        self.rrpv[set * self.assoc + way] = value;
    }

    fn victim_order(&mut self, set: usize, _req: &Request, _ways: &[WayView]) -> Vec<usize> {
        let base = set * self.assoc;
        let lines = &mut self.rrpv[base..base + self.assoc];
        let oldest = *lines.iter().max().expect("non-empty set");
        let age = self.max_rrpv - oldest;
        for r in lines.iter_mut() {
            *r += age;
        }
        let mut order: Vec<usize> = (0..self.assoc).collect();
        order.sort_by_key(|&w| std::cmp::Reverse(lines[w]));
        order
    }

    fn promote(&mut self, set: usize, way: usize) {
        self.rrpv[set * self.assoc + way] = 0;
    }
}
