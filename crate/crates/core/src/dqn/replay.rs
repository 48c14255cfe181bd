use std::collections::VecDeque;

use rand::Rng as _;

use crate::graph::EdgeEdit;
use crate::rng::Rng;

/// An n-step transition. States are stored as edit histories applied to the
/// episode's base graph rather than as graph copies.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTuple {
    pub target: usize,
    pub state: Vec<EdgeEdit>,
    pub action: EdgeEdit,
    /// Sum of the `n` step rewards following `state`.
    pub n_step_reward: f64,
    /// `state`, then `action`, then `n − 1` further edits.
    pub successor: Vec<EdgeEdit>,
}

/// Fixed-capacity memory; the oldest tuple is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<ReplayTuple>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: ReplayTuple) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `size` tuples drawn uniformly with replacement.
    pub fn sample(&self, size: usize, rng: &mut Rng) -> Vec<&ReplayTuple> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..size).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayTuple> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn tuple(i: usize) -> ReplayTuple {
        ReplayTuple {
            target: i,
            state: vec![],
            action: EdgeEdit::add(i, i + 1),
            n_step_reward: i as f64,
            successor: vec![EdgeEdit::add(i, i + 1)],
        }
    }

    #[test]
    fn never_exceeds_capacity_and_evicts_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..10 {
            buf.push(tuple(i));
            assert!(buf.len() <= 3);
        }
        let kept: Vec<usize> = buf.iter().map(|t| t.target).collect();
        assert_eq!(kept, vec![7, 8, 9]);
    }

    #[test]
    fn sampling_covers_buffer() {
        let mut buf = ReplayBuffer::new(5);
        assert!(buf.sample(4, &mut seeded(1)).is_empty());
        for i in 0..5 {
            buf.push(tuple(i));
        }
        let mut seen = [false; 5];
        for t in buf.sample(200, &mut seeded(2)) {
            seen[t.target] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
