//! In-order per-core stall model: every access waits for the one before it
//! on the same core and costs its full level latency.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StallEvent {
    pub core: u8,
    pub is_instruction: bool,
    pub latency: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StallEstimate {
    /// Sum over cores of each core's busy time.
    pub total_cycles: u64,
    pub ifetch_cycles: u64,
    pub data_cycles: u64,
    /// Finish time of the slowest core.
    pub makespan_cycles: u64,
    pub per_core_cycles: Vec<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct StallEstimator {
    est: StallEstimate,
}

impl StallEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges one access and returns its completion time on its core.
    pub fn record(&mut self, ev: StallEvent) -> u64 {
        let core = ev.core as usize;
        if self.est.per_core_cycles.len() <= core {
            self.est.per_core_cycles.resize(core + 1, 0);
        }
        let t = &mut self.est.per_core_cycles[core];
        *t += ev.latency;
        if ev.is_instruction {
            self.est.ifetch_cycles += ev.latency;
        } else {
            self.est.data_cycles += ev.latency;
        }
        self.est.total_cycles += ev.latency;
        let done = *t;
        self.est.makespan_cycles = self.est.makespan_cycles.max(done);
        done
    }

    pub fn finish(self) -> StallEstimate {
        self.est
    }
}

/// Replays `events`, returning the estimate and each event's completion time.
pub fn estimate_stalls(events: &[StallEvent]) -> (StallEstimate, Vec<u64>) {
    let mut s = StallEstimator::new();
    let completion = events.iter().map(|&e| s.record(e)).collect();
    (s.finish(), completion)
}
