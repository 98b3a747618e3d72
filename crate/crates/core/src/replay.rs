//! Ring-buffer experience replay for the DDQN baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: [f64; 2],
    pub action: Action,
    pub reward: f64,
    pub next_obs: [f64; 2],
    pub done: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    buffer: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            buffer: Vec::with_capacity(capacity),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.buffer.len() < self.capacity {
            self.buffer.push(t);
        } else {
            self.buffer[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample without replacement within the batch.
    pub fn sample(&self, batch_size: usize, rng: &mut SeededRng) -> Vec<Transition> {
        assert!(batch_size <= self.buffer.len(), "batch larger than buffer");
        // Partial Fisher-Yates over an index vector.
        let mut idx: Vec<usize> = (0..self.buffer.len()).collect();
        for i in 0..batch_size {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx[..batch_size].iter().map(|&i| self.buffer[i]).collect()
    }
}
