//! Instruction miss rates split by the outcome of the data access each
//! fetch leads to.

use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConditionalRates {
    pub pairs: u64,
    pub pairs_data_hit: u64,
    pub pairs_data_miss: u64,
    pub rate_given_data_hit: Option<f64>,
    pub rate_given_data_miss: Option<f64>,
}

impl ConditionalRates {
    /// From `(instruction_missed, data_hit)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut t = ConditionalTracker::default();
        for (imiss, dhit) in pairs {
            t.count(imiss, dhit);
        }
        t.rates()
    }
}

/// Pairs each LLC instruction fetch with the next LLC data access on the
/// same core attributed to the same instruction line.
#[derive(Clone, Debug, Default)]
pub struct ConditionalTracker {
    pending: Vec<Option<(u64, bool)>>,
    /// `[data_hit][instruction_missed]`
    counts: [[u64; 2]; 2],
}

impl ConditionalTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on_ifetch(&mut self, core: u8, line: u64, hit: bool) {
        let core = core as usize;
        if self.pending.len() <= core {
            self.pending.resize(core + 1, None);
        }
        self.pending[core] = Some((line, !hit));
    }

    pub fn on_data(&mut self, core: u8, paired_il: Option<u64>, hit: bool) {
        let Some(il) = paired_il else { return };
        let Some(slot) = self.pending.get_mut(core as usize) else { return };
        if let Some((line, imiss)) = *slot {
            if line == il {
                *slot = None;
                self.count(imiss, hit);
            }
        }
    }

    fn count(&mut self, imiss: bool, dhit: bool) {
        self.counts[usize::from(dhit)][usize::from(imiss)] += 1;
    }

    pub fn rates(&self) -> ConditionalRates {
        let [miss_side, hit_side] = self.counts;
        let rate = |c: [u64; 2]| {
            let n = c[0] + c[1];
            (n > 0).then(|| c[1] as f64 / n as f64)
        };
        ConditionalRates {
            pairs: miss_side.iter().chain(&hit_side).sum(),
            pairs_data_hit: hit_side[0] + hit_side[1],
            pairs_data_miss: miss_side[0] + miss_side[1],
            rate_given_data_hit: rate(hit_side),
            rate_given_data_miss: rate(miss_side),
        }
    }
}
