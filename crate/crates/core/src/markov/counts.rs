use std::collections::BTreeMap;

use super::state::StateKey;

/// Raw counts accumulated from training sequences.
///
/// Ordered maps make equality and serialization independent of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub state_freq: BTreeMap<StateKey, u64>,
    pub start: BTreeMap<StateKey, u64>,
    pub trans: BTreeMap<(StateKey, StateKey), u64>,
}

impl TransitionCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sequence(&mut self, seq: &[StateKey]) {
        let Some(first) = seq.first() else { return };
        *self.start.entry(*first).or_default() += 1;
        for s in seq {
            *self.state_freq.entry(*s).or_default() += 1;
        }
        for w in seq.windows(2) {
            *self.trans.entry((w[0], w[1])).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &TransitionCounts) {
        for (k, v) in &other.state_freq {
            *self.state_freq.entry(*k).or_default() += v;
        }
        for (k, v) in &other.start {
            *self.start.entry(*k).or_default() += v;
        }
        for (k, v) in &other.trans {
            *self.trans.entry(*k).or_default() += v;
        }
    }

    pub fn merged(mut self, other: TransitionCounts) -> Self {
        if self.state_freq.len() < other.state_freq.len() {
            let mut o = other;
            o.merge(&self);
            return o;
        }
        self.merge(&other);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.state_freq.is_empty()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        let mut out = self.clone();
        out.state_freq.values_mut().for_each(|v| *v *= factor);
        out.start.values_mut().for_each(|v| *v *= factor);
        out.trans.values_mut().for_each(|v| *v *= factor);
        out
    }
}
