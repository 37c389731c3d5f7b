use std::collections::VecDeque;

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub terminal: bool,
    /// Insertion counter at the time this transition was pushed.
    pub tag: u64,
}

/// FIFO replay buffer; the oldest transition is evicted once `capacity` is reached.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: Option<usize>,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: Option<usize>) -> Self {
        ReplayBuffer {
            items: VecDeque::new(),
            capacity: capacity.map(|c| c.max(1)),
            inserted: 0,
        }
    }

    pub fn push(&mut self, state: usize, action: usize, reward: f64, next_state: usize, terminal: bool) {
        if self.capacity.is_some_and(|c| self.items.len() == c) {
            self.items.pop_front();
        }
        self.items.push_back(Transition {
            state,
            action,
            reward,
            next_state,
            terminal,
            tag: self.inserted,
        });
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` transitions drawn uniformly with replacement from the newest `window` entries
    /// (the whole buffer when `window` is `None`).
    pub fn sample(&self, n: usize, window: Option<usize>, rng: &mut Rng) -> Result<Vec<Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let len = self.items.len();
        let span = window.map_or(len, |w| w.clamp(1, len));
        let start = len - span;
        Ok((0..n).map(|_| self.items[start + rng.random_range(0..span)]).collect())
    }
}
