use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TerminationKind, Transition};
use crate::env::ACTION_DIM;

pub const DEFAULT_CAPACITY: usize = 100_000;

/// FIFO ring of transitions with its own seeded sampler.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next insertion overwrites once full.
    head: usize,
    rng: ChaCha8Rng,
}

/// Row-stacked minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub safety: Array1<f64>,
    pub kinds: Vec<TerminationKind>,
}

impl Batch {
    pub fn from_transitions<'a, I>(transitions: I) -> Self
    where
        I: IntoIterator<Item = &'a Transition>,
    {
        let ts: Vec<&Transition> = transitions.into_iter().collect();
        let n = ts.len();
        let obs_dim = ts.first().map_or(0, |t| t.obs.len());
        let mut obs = Array2::zeros((n, obs_dim));
        let mut next_obs = Array2::zeros((n, obs_dim));
        let mut actions = Array2::zeros((n, ACTION_DIM));
        for (r, t) in ts.iter().enumerate() {
            obs.row_mut(r)
                .assign(&ndarray::ArrayView1::from(&t.obs[..]));
            next_obs
                .row_mut(r)
                .assign(&ndarray::ArrayView1::from(&t.next_obs[..]));
            actions
                .row_mut(r)
                .assign(&ndarray::ArrayView1::from(&t.action[..]));
        }
        Self {
            obs,
            actions,
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_obs,
            safety: ts.iter().map(|t| t.safety).collect(),
            kinds: ts.iter().map(|t| t.kind).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.head] = transition;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items[self.head..]
            .iter()
            .chain(&self.items[..self.head])
    }

    /// Uniform sample with replacement; `None` until `batch_size` items exist.
    pub fn sample(&mut self, batch_size: usize) -> Option<Batch> {
        if batch_size == 0 || self.items.len() < batch_size {
            return None;
        }
        let n = self.items.len();
        let picks: Vec<&Transition> = (0..batch_size)
            .map(|_| &self.items[self.rng.random_range(0..n)])
            .collect();
        Some(Batch::from_transitions(picks))
    }

    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }
}
