use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Reject,
    Accept,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Reject => 0,
            Action::Accept => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Reject
        } else {
            Action::Accept
        }
    }
}

/// +1 for accepting a node that keeps accuracy at or above the baseline, or
/// for rejecting one that pushes it below; −1 otherwise.
pub fn reward(acc: f64, baseline: f64, action: Action) -> f64 {
    let helps = acc >= baseline;
    match (helps, action) {
        (true, Action::Accept) | (false, Action::Reject) => 1.0,
        (false, Action::Accept) | (true, Action::Reject) => -1.0,
    }
}

/// Moving baseline: mean of the most recent `capacity` accuracies, starting
/// from the initial classifier's accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTracker {
    capacity: usize,
    history: VecDeque<f64>,
}

impl RewardTracker {
    pub fn new(acc0: f64, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let mut history = VecDeque::with_capacity(capacity);
        history.push_back(acc0);
        Self { capacity, history }
    }

    pub fn baseline(&self) -> f64 {
        self.history.iter().sum::<f64>() / self.history.len() as f64
    }

    pub fn push(&mut self, acc: f64) {
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(acc);
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn contents(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_cases() {
        assert_eq!(reward(0.70, 0.60, Action::Accept), 1.0);
        assert_eq!(reward(0.50, 0.60, Action::Accept), -1.0);
        assert_eq!(reward(0.50, 0.60, Action::Reject), 1.0);
        assert_eq!(reward(0.70, 0.60, Action::Reject), -1.0);
        assert_eq!(reward(0.60, 0.60, Action::Reject), -1.0);
        assert_eq!(reward(0.60, 0.60, Action::Accept), 1.0);
    }

    #[test]
    fn tracker_window() {
        let mut t = RewardTracker::new(0.5, 3);
        assert_eq!(t.baseline(), 0.5);
        t.push(1.0);
        assert_eq!(t.baseline(), 0.75);
        t.push(0.0);
        t.push(0.25);
        assert_eq!(t.len(), 3);
        assert_eq!(t.contents().collect::<Vec<_>>(), vec![1.0, 0.0, 0.25]);
    }
}
