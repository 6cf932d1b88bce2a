//! Coloring timer, protection threshold controller and its PMU counters.

use std::collections::VecDeque;

use super::table::MISS_COST_MAX;

/// Cost after `(current - last) mod 2^bits` color steps of decay.
pub fn aged_cost(cost: u8, last_color: u8, current_color: u8, color_bits: u32) -> u8 {
    let mask = ((1u16 << color_bits) - 1) as u8;
    cost.saturating_sub(current_color.wrapping_sub(last_color) & mask)
}

/// New threshold given the period's conditional data-miss rate `p` and
/// overall miss rate `m`.
pub fn adjust_threshold(threshold: u8, p: f64, m: f64, margin: f64, step: u8) -> u8 {
    if p < m * (1.0 - margin) {
        threshold.saturating_sub(step)
    } else if p > m * (1.0 + margin) {
        threshold.saturating_add(step).min(MISS_COST_MAX)
    } else {
        threshold
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeriodCounters {
    pub matched_data_hits: u64,
    pub matched_data_total: u64,
    pub llc_hits: u64,
    pub llc_accesses: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColorState {
    color_bits: u32,
    color: u8,
    period_n: u64,
    threshold: u8,
    dynamic: bool,
    step: u8,
    margin: f64,
    ring_len: usize,
    rings: Vec<VecDeque<u64>>,
    counters: PeriodCounters,
    trajectory: Vec<u8>,
}

impl ColorState {
    pub fn new(color_bits: u32, period_n: u64, threshold: u8, dynamic: bool, step: u8, margin: f64, ring_len: usize) -> Self {
        ColorState {
            color_bits,
            color: 0,
            period_n,
            threshold,
            dynamic,
            step,
            margin,
            ring_len,
            rings: Vec::new(),
            counters: PeriodCounters::default(),
            trajectory: Vec::new(),
        }
    }

    pub fn color(&self) -> u8 {
        self.color
    }

    pub fn color_bits(&self) -> u32 {
        self.color_bits
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }

    /// Threshold in force after each completed period.
    pub fn trajectory(&self) -> &[u8] {
        &self.trajectory
    }

    pub fn counters(&self) -> &PeriodCounters {
        &self.counters
    }

    pub fn recent_miss_pcs(&self, core: u8) -> impl Iterator<Item = u64> + '_ {
        self.rings.get(core as usize).into_iter().flatten().copied()
    }

    pub fn record_instruction_miss(&mut self, core: u8, pc: u64) {
        if self.ring_len == 0 {
            return;
        }
        let core = core as usize;
        if self.rings.len() <= core {
            self.rings.resize_with(core + 1, VecDeque::new);
        }
        let ring = &mut self.rings[core];
        if ring.len() == self.ring_len {
            ring.pop_front();
        }
        ring.push_back(pc & !63);
    }

    /// Accounts one LLC demand access. Returns true when the color advanced.
    pub fn tick(&mut self, core: u8, is_instruction: bool, pc: u64, hit: bool) -> bool {
        let c = &mut self.counters;
        c.llc_accesses += 1;
        c.llc_hits += u64::from(hit);
        if !is_instruction {
            let aligned = pc & !63;
            if self.rings.get(core as usize).is_some_and(|r| r.contains(&aligned)) {
                c.matched_data_total += 1;
                c.matched_data_hits += u64::from(hit);
            }
        }
        if c.llc_accesses < self.period_n {
            return false;
        }
        self.end_period();
        true
    }

    fn end_period(&mut self) {
        let c = &self.counters;
        if self.dynamic && c.matched_data_total > 0 {
            let p = 1.0 - c.matched_data_hits as f64 / c.matched_data_total as f64;
            let m = 1.0 - c.llc_hits as f64 / c.llc_accesses as f64;
            self.threshold = adjust_threshold(self.threshold, p, m, self.margin, self.step);
        }
        self.trajectory.push(self.threshold);
        let mask = ((1u16 << self.color_bits) - 1) as u8;
        self.color = (self.color + 1) & mask;
        self.counters = PeriodCounters::default();
        self.rings.iter_mut().for_each(VecDeque::clear);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Decrements one step at a time, as a hardware ager would.
    fn stepwise(cost: u8, last: u8, cur: u8) -> u8 {
        let mut c = cost;
        let mut color = last;
        while color != cur {
            color = (color + 1) % 8;
            c = c.saturating_sub(1);
        }
        c
    }

    #[test]
    fn aging_matches_stepwise_decay_exhaustively() {
        for cost in 0..=63u8 {
            for last in 0..8u8 {
                for cur in 0..8u8 {
                    assert_eq!(aged_cost(cost, last, cur, 3), stepwise(cost, last, cur), "{cost} {last} {cur}");
                }
            }
        }
        assert_eq!(aged_cost(25, 5, 0, 3), 22);
    }

    #[test]
    fn threshold_moves_against_conditional_miss_rate() {
        assert_eq!(adjust_threshold(32, 0.2, 0.5, 0.05, 1), 31);
        assert_eq!(adjust_threshold(32, 0.8, 0.5, 0.05, 1), 33);
        assert_eq!(adjust_threshold(32, 0.51, 0.5, 0.05, 1), 32);
        assert_eq!(adjust_threshold(0, 0.0, 0.5, 0.05, 1), 0);
        assert_eq!(adjust_threshold(63, 1.0, 0.5, 0.05, 1), 63);
    }

    #[test]
    fn period_without_matches_keeps_threshold() {
        let mut c = ColorState::new(3, 4, 32, true, 1, 0.05, 10);
        for _ in 0..4 {
            c.tick(0, false, 0x1000, false);
        }
        assert_eq!((c.threshold(), c.color()), (32, 1));
        assert_eq!(c.trajectory(), &[32]);
    }

    #[test]
    fn ring_keeps_ten_latest_and_clears_each_period() {
        let mut c = ColorState::new(3, 1000, 32, true, 1, 0.05, 10);
        for i in 0..15u64 {
            c.record_instruction_miss(2, i * 64 + 3);
        }
        let pcs: Vec<u64> = c.recent_miss_pcs(2).collect();
        assert_eq!(pcs, (5..15).map(|i| i * 64).collect::<Vec<_>>());
        c.tick(2, false, 4 * 64, true);
        assert_eq!(c.counters().matched_data_total, 0);
        c.tick(2, false, 5 * 64 + 8, true);
        assert_eq!(c.counters().matched_data_hits, 1);
        for _ in 0..998 {
            c.tick(0, true, 0, false);
        }
        assert_eq!(c.recent_miss_pcs(2).count(), 0);
        assert_eq!(c.color(), 1);
    }

    #[test]
    fn color_wraps() {
        let mut c = ColorState::new(3, 1, 32, false, 1, 0.05, 10);
        for _ in 0..9 {
            c.tick(0, true, 0, true);
        }
        assert_eq!(c.color(), 1);
    }
}
