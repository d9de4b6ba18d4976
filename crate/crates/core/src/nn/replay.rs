//! Fixed-capacity experience replay with FIFO eviction.

use std::collections::VecDeque;

use rand::seq::index;
use rand::seq::SliceRandom;

use crate::rng::Rng;

pub const DEFAULT_CAPACITY: usize = 100_000;
pub const DEFAULT_BATCH: usize = 512;

/// A value-learning transition. `next_state == None` marks a terminal
/// (Monte-Carlo settled) sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
    pushed: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { items: VecDeque::with_capacity(capacity.min(4096)), capacity, pushed: 0 }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
        self.pushed += 1;
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

    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `n` distinct items drawn uniformly; the whole buffer, shuffled, when
    /// it holds `n` or fewer.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Vec<&T> {
        if self.items.len() <= n {
            let mut all: Vec<&T> = self.items.iter().collect();
            all.shuffle(rng);
            return all;
        }
        index::sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn evicts_oldest_past_capacity() {
        let mut b = ReplayBuffer::new(DEFAULT_CAPACITY);
        for i in 0..=DEFAULT_CAPACITY {
            b.push(i);
        }
        assert_eq!(b.len(), DEFAULT_CAPACITY);
        assert_eq!(*b.iter().next().unwrap(), 1);
        assert_eq!(b.total_pushed(), DEFAULT_CAPACITY as u64 + 1);
    }

    #[test]
    fn small_buffer_returns_everything_shuffled() {
        let mut b = ReplayBuffer::new(1000);
        for i in 0..512 {
            b.push(i);
        }
        let s = b.sample(&mut seeded(1), 512);
        let mut sorted: Vec<i32> = s.iter().map(|v| **v).collect();
        assert_ne!(sorted, (0..512).collect::<Vec<_>>());
        sorted.sort();
        assert_eq!(sorted, (0..512).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_seed_deterministic_and_without_replacement() {
        let mut b = ReplayBuffer::new(5000);
        for i in 0..5000 {
            b.push(i);
        }
        let a: Vec<i32> = b.sample(&mut seeded(7), 512).into_iter().copied().collect();
        let c: Vec<i32> = b.sample(&mut seeded(7), 512).into_iter().copied().collect();
        let d: Vec<i32> = b.sample(&mut seeded(8), 512).into_iter().copied().collect();
        assert_eq!(a, c);
        assert_ne!(a, d);
        let mut u = a.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 512);
    }
}
