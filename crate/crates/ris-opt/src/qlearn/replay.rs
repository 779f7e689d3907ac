//! FIFO replay buffer with uniform with-replacement minibatch sampling.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Result, RisError};

/// One replay record (s, a, r, s', done).
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    ring: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            ring: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest entries are evicted first once the buffer is full.
    pub fn push(&mut self, t: Transition) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(t);
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng>(&self, n_batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.ring.len() < n_batch {
            return Err(RisError::InvalidArgument(format!(
                "buffer holds {} transitions, minibatch needs {n_batch}",
                self.ring.len()
            )));
        }
        Ok((0..n_batch)
            .map(|_| &self.ring[rng.gen_range(0..self.ring.len())])
            .collect())
    }
}
