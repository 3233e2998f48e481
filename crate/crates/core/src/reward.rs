//! Per-timestep penalties: contention, over-utilization, waiting and
//! under-utilization. Every component is `<= 0`.

use serde::{Deserialize, Serialize};

use crate::sim::{JobProfile, StepInfo};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_contention: f64,
    pub w_over: f64,
    pub w_wait: f64,
    pub w_under: f64,
    pub gamma: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { w_contention: 1.0, w_over: 50.0, w_wait: 1.0, w_under: 0.1, gamma: 0.99 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("w_contention", self.w_contention),
            ("w_over", self.w_over),
            ("w_wait", self.w_wait),
            ("w_under", self.w_under),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("reward.{name} must be finite and >= 0")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("reward.gamma must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Multiplies the four component weights by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        RewardWeights {
            w_contention: self.w_contention * c,
            w_over: self.w_over * c,
            w_wait: self.w_wait * c,
            w_under: self.w_under * c,
            gamma: self.gamma,
        }
    }
}

/// Weighted components of one timestep's reward.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RewardBreakdown {
    pub total: f64,
    pub contention: f64,
    pub over: f64,
    pub wait: f64,
    pub under: f64,
}

impl RewardBreakdown {
    pub fn add(&mut self, other: &RewardBreakdown) {
        self.total += other.total;
        self.contention += other.contention;
        self.over += other.over;
        self.wait += other.wait;
        self.under += other.under;
    }

    pub fn scale(&mut self, c: f64) {
        self.total *= c;
        self.contention *= c;
        self.over *= c;
        self.wait *= c;
        self.under *= c;
    }
}

/// Unweighted contention: `-Σ_m Σ_d Σ_{i<j} u_i u_j` with usage in fractions
/// of capacity.
pub fn contention_penalty(step: &StepInfo) -> f64 {
    let cap = step.capacity as f64;
    let mut sum = 0.0;
    for row in &step.machines {
        for d in 0..row.totals.len() {
            // Σ_{i<j} u_i u_j accumulated in a single pass
            let mut prefix = 0.0;
            for occ in &row.occupants {
                let u = occ.units[d] as f64 / cap;
                sum += prefix * u;
                prefix += u;
            }
        }
    }
    -sum
}

/// Σ over the concurrently running window of `u_i(t) * u_j(t)` in
/// dimension `d`, for two jobs started at the given wall-clock times.
pub fn cross_correlation(
    profile_i: &JobProfile,
    start_i: u32,
    profile_j: &JobProfile,
    start_j: u32,
    d: usize,
    capacity: u32,
) -> f64 {
    let lo = start_i.max(start_j);
    let hi = (start_i + profile_i.length).min(start_j + profile_j.length);
    let cap = capacity as f64;
    (lo..hi)
        .map(|t| {
            let a = profile_i.demand(t - start_i, d) as f64 / cap;
            let b = profile_j.demand(t - start_j, d) as f64 / cap;
            a * b
        })
        .sum()
}

/// Number of (machine, dimension) pairs whose demand exceeds capacity.
pub fn overutilization_events(step: &StepInfo) -> usize {
    step.machines
        .iter()
        .map(|row| row.totals.iter().filter(|&&u| u > step.capacity).count())
        .sum()
}

/// Σ max(0, demand - C) / C over machines and dimensions.
pub fn overshoot(step: &StepInfo) -> f64 {
    let cap = step.capacity;
    step.machines
        .iter()
        .flat_map(|row| row.totals.iter())
        .map(|&u| u.saturating_sub(cap) as f64 / cap as f64)
        .sum()
}

pub fn overutilization_penalty(step: &StepInfo, weights: &RewardWeights) -> f64 {
    -weights.w_over * overutilization_events(step) as f64
}

pub fn wait_penalty(queue_len: usize, backlog_count: usize, weights: &RewardWeights) -> f64 {
    -weights.w_wait * (queue_len + backlog_count) as f64
}

/// Σ over used machines of free capacity, in fractions of capacity.
pub fn unused_capacity(step: &StepInfo) -> f64 {
    let cap = step.capacity;
    step.machines
        .iter()
        .filter(|row| !row.occupants.is_empty())
        .flat_map(|row| row.totals.iter())
        .map(|&u| cap.saturating_sub(u) as f64 / cap as f64)
        .sum()
}

pub fn underutilization_penalty(step: &StepInfo, weights: &RewardWeights) -> f64 {
    -weights.w_under * unused_capacity(step)
}

pub fn total_reward(step: &StepInfo, weights: &RewardWeights) -> RewardBreakdown {
    let contention = weights.w_contention * contention_penalty(step);
    let over = overutilization_penalty(step, weights);
    let wait = wait_penalty(step.queue_len, step.backlog_count, weights);
    let under = underutilization_penalty(step, weights);
    RewardBreakdown { total: contention + over + wait + under, contention, over, wait, under }
}
