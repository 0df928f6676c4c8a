//! Transition storage: local n-step assembly and the shared ring.

use std::collections::VecDeque;

use rand::Rng;

use crate::config::ReplayConfig;
use crate::env::DoneReason;
use crate::obs::FrameStack;
use crate::replay::{MaxTree, SumTree};

/// One n-step transition. Frames are shared, so clones are cheap.
#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: FrameStack,
    pub action: [f64; 2],
    /// Discounted reward sum over the window.
    pub n_return: f64,
    /// Observation after the last reward in the window.
    pub next_obs: FrameStack,
    /// True when the window ends in a terminal state (bootstrapping off).
    pub terminal: bool,
    /// Number of rewards folded into `n_return`.
    pub steps: u32,
}

/// Discounted sum of a reward window.
///
/// The accumulation order is pinned: terms are added front to back while
/// the discount power is built up by repeated multiplication. Training and
/// any reference computation agree bit for bit as long as both follow it.
pub fn n_step_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut coef = 1.0;
    for &r in rewards {
        acc += coef * r;
        coef *= gamma;
    }
    acc
}

struct StepRecord {
    obs: FrameStack,
    action: [f64; 2],
    reward: f64,
}

/// Per-actor staging area that turns episode steps into n-step transitions.
pub struct LocalBuffer {
    n: usize,
    gamma: f64,
    capacity: usize,
    flush_threshold: usize,
    steps: VecDeque<StepRecord>,
    ready: VecDeque<Transition>,
    dropped: u64,
}

impl LocalBuffer {
    pub fn new(n: usize, gamma: f64, cfg: &ReplayConfig) -> LocalBuffer {
        assert!(n >= 1, "n-step window must be at least 1");
        LocalBuffer {
            n,
            gamma,
            capacity: cfg.local_capacity,
            flush_threshold: cfg.flush_threshold,
            steps: VecDeque::new(),
            ready: VecDeque::new(),
            dropped: 0,
        }
    }

    fn stash(&mut self, t: Transition) {
        if self.ready.len() == self.capacity {
            self.ready.pop_front();
            self.dropped += 1;
        }
        self.ready.push_back(t);
    }

    /// Record one step: the observation the action was chosen from, the
    /// action, and the reward it earned.
    pub fn push_step(&mut self, obs: FrameStack, action: [f64; 2], reward: f64) {
        self.steps.push_back(StepRecord { obs, action, reward });
        if self.steps.len() > self.n {
            let rewards: Vec<f64> = self.steps.iter().take(self.n).map(|s| s.reward).collect();
            let next_obs = self.steps[self.n].obs.clone();
            let front = self.steps.pop_front().unwrap();
            let t = Transition {
                obs: front.obs,
                action: front.action,
                n_return: n_step_return(&rewards, self.gamma),
                next_obs,
                terminal: false,
                steps: self.n as u32,
            };
            self.stash(t);
        }
    }

    /// Close out the episode: every remaining step gets a truncated window
    /// ending at the final observation.
    pub fn finish_episode(&mut self, final_obs: FrameStack, reason: DoneReason) {
        let terminal = reason != DoneReason::Timeout;
        let rewards: Vec<f64> = self.steps.iter().map(|s| s.reward).collect();
        let m = rewards.len();
        for i in 0..m {
            let rec = self.steps.pop_front().unwrap();
            let t = Transition {
                obs: rec.obs,
                action: rec.action,
                n_return: n_step_return(&rewards[i..], self.gamma),
                next_obs: final_obs.clone(),
                terminal,
                steps: (m - i) as u32,
            };
            self.stash(t);
        }
    }

    pub fn pending(&self) -> usize {
        self.ready.len()
    }

    pub fn should_flush(&self) -> bool {
        self.ready.len() >= self.flush_threshold
    }

    pub fn drain(&mut self) -> Vec<Transition> {
        self.ready.drain(..).collect()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

pub struct SampleBatch {
    pub slots: Vec<usize>,
    pub ids: Vec<u64>,
    pub weights: Vec<f64>,
    pub transitions: Vec<Transition>,
}

/// Shared replay ring with proportional prioritized sampling.
pub struct GlobalBuffer {
    capacity: usize,
    data: Vec<Option<Transition>>,
    ids: Vec<u64>,
    next_id: u64,
    write: usize,
    len: usize,
    inserted: u64,
    sum: SumTree,
    maxp: MaxTree,
    prioritized: bool,
    alpha: f64,
    eps: f64,
}

impl GlobalBuffer {
    pub fn new(cfg: &ReplayConfig) -> GlobalBuffer {
        GlobalBuffer {
            capacity: cfg.global_capacity,
            data: (0..cfg.global_capacity).map(|_| None).collect(),
            ids: vec![0; cfg.global_capacity],
            next_id: 1,
            write: 0,
            len: 0,
            inserted: 0,
            sum: SumTree::new(cfg.global_capacity),
            maxp: MaxTree::new(cfg.global_capacity),
            prioritized: cfg.prioritized,
            alpha: cfg.priority_alpha,
            eps: cfg.priority_eps,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total transitions ever inserted, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Insert at the current maximum raw priority (1 when empty), evicting
    /// the oldest slot once full.
    pub fn insert(&mut self, t: Transition) -> u64 {
        let raw = if self.len == 0 { 1.0 } else { self.maxp.max().max(self.eps) };
        let slot = self.write;
        let id = self.next_id;
        self.next_id += 1;
        self.inserted += 1;
        self.data[slot] = Some(t);
        self.ids[slot] = id;
        self.maxp.set(slot, raw);
        self.sum.set(slot, raw.powf(self.alpha));
        self.write = (self.write + 1) % self.capacity;
        if self.len < self.capacity {
            self.len += 1;
        }
        id
    }

    pub fn insert_batch(&mut self, ts: Vec<Transition>) {
        for t in ts {
            self.insert(t);
        }
    }

    pub fn sample(&self, batch: usize, beta: f64, rng: &mut impl Rng) -> SampleBatch {
        assert!(self.len > 0, "cannot sample from an empty buffer");
        let mut slots = Vec::with_capacity(batch);
        let mut ids = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        let mut transitions = Vec::with_capacity(batch);
        if self.prioritized {
            let total = self.sum.total();
            for _ in 0..batch {
                let slot = loop {
                    let u = rng.random_range(0.0..total);
                    let s = self.sum.descend(u);
                    // Rounding at the right edge can land on an empty leaf.
                    if self.data[s].is_some() {
                        break s;
                    }
                };
                let prob = self.sum.get(slot) / total;
                weights.push((self.len as f64 * prob).powf(-beta));
                slots.push(slot);
                ids.push(self.ids[slot]);
                transitions.push(self.data[slot].clone().unwrap());
            }
            let max_w = weights.iter().cloned().fold(f64::MIN, f64::max);
            for w in weights.iter_mut() {
                *w /= max_w;
            }
        } else {
            for _ in 0..batch {
                let slot = rng.random_range(0..self.len);
                slots.push(slot);
                ids.push(self.ids[slot]);
                weights.push(1.0);
                transitions.push(self.data[slot].clone().unwrap());
            }
        }
        SampleBatch { slots, ids, weights, transitions }
    }

    /// Set priorities from TD errors for previously sampled slots. Entries
    /// whose slot has been overwritten since sampling are skipped.
    pub fn update_priorities(&mut self, slots: &[usize], ids: &[u64], td_errors: &[f64]) {
        for ((&slot, &id), &td) in slots.iter().zip(ids.iter()).zip(td_errors.iter()) {
            if self.ids[slot] != id {
                continue;
            }
            let raw = td.abs() + self.eps;
            self.maxp.set(slot, raw);
            self.sum.set(slot, raw.powf(self.alpha));
        }
    }

    pub fn total_priority(&self) -> f64 {
        self.sum.total()
    }

    /// Linear rescan of the priority mass, for drift checks.
    pub fn rescan_total_priority(&self) -> f64 {
        self.sum.rescan_total()
    }
}
