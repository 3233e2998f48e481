//! Evaluation metrics over an [`EpisodeTrace`].

use std::fmt::Write as _;

use crate::reward::RewardBreakdown;
use crate::sim::StepInfo;

/// One logical timestep of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: u32,
    /// Unclamped demand, `machines x dims` row-major.
    pub demand: Vec<u32>,
    pub used: Vec<bool>,
    pub queue_len: usize,
    pub backlog_count: usize,
    pub placements: usize,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub machines: usize,
    pub dims: usize,
    pub capacity: u32,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn new(machines: usize, dims: usize, capacity: u32) -> Self {
        EpisodeTrace { machines, dims, capacity, steps: Vec::new() }
    }

    pub fn record(&mut self, info: &StepInfo, reward: RewardBreakdown) {
        let demand = info.machines.iter().flat_map(|row| row.totals.iter().copied()).collect();
        let used = info.machines.iter().map(|row| !row.occupants.is_empty()).collect();
        self.steps.push(TraceStep {
            t: info.clock,
            demand,
            used,
            queue_len: info.queue_len,
            backlog_count: info.backlog_count,
            placements: info.placements,
            reward,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn demand(&self, step: usize, m: usize, d: usize) -> u32 {
        self.steps[step].demand[m * self.dims + d]
    }

    pub fn total_reward(&self) -> RewardBreakdown {
        let mut sum = RewardBreakdown::default();
        for s in &self.steps {
            sum.add(&s.reward);
        }
        sum
    }

    /// CSV with one row per timestep: `t, queue_len, backlog, placements,
    /// used_machines`, per-machine per-dimension demand, then the reward
    /// breakdown `r_total, r_contention, r_over, r_wait, r_under`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,queue_len,backlog,placements,used_machines");
        for m in 1..=self.machines {
            for d in 0..self.dims {
                write!(out, ",demand_m{m}_d{d}").unwrap();
            }
        }
        out.push_str(",r_total,r_contention,r_over,r_wait,r_under\n");
        for s in &self.steps {
            let used = s.used.iter().filter(|&&u| u).count();
            write!(out, "{},{},{},{},{used}", s.t, s.queue_len, s.backlog_count, s.placements).unwrap();
            for u in &s.demand {
                write!(out, ",{u}").unwrap();
            }
            let r = &s.reward;
            writeln!(out, ",{},{},{},{},{}", r.total, r.contention, r.over, r.wait, r.under).unwrap();
        }
        out
    }
}

/// Σ_t Σ_m demand(m, d, t) / (T · M_max · C), with demand clamped at `C`
/// unless `clamp` is false. Returns 0 when no machine is ever used.
pub fn avg_utilization(trace: &EpisodeTrace, d: usize, clamp: bool) -> f64 {
    let (max_used, _) = machines_used(trace);
    if max_used == 0 || trace.is_empty() {
        return 0.0;
    }
    let cap = trace.capacity;
    let total: u64 = (0..trace.len())
        .flat_map(|t| (0..trace.machines).map(move |m| (t, m)))
        .map(|(t, m)| {
            let u = trace.demand(t, m, d);
            (if clamp { u.min(cap) } else { u }) as u64
        })
        .sum();
    total as f64 / (trace.len() as f64 * max_used as f64 * cap as f64)
}

/// `1 - mean_t [max_m avail / Σ_m avail]`, skipping timesteps without any
/// free capacity. `None` when every timestep is skipped.
pub fn avg_fragmentation(trace: &EpisodeTrace, d: usize) -> Option<f64> {
    let cap = trace.capacity;
    let mut sum = 0.0;
    let mut counted = 0usize;
    for t in 0..trace.len() {
        let mut max = 0u32;
        let mut total = 0u64;
        for m in 0..trace.machines {
            let avail = cap.saturating_sub(trace.demand(t, m, d));
            max = max.max(avail);
            total += avail as u64;
        }
        if total > 0 {
            sum += max as f64 / total as f64;
            counted += 1;
        }
    }
    (counted > 0).then(|| 1.0 - sum / counted as f64)
}

/// `(event_count, overshoot_sum)` over every (t, machine, dimension).
pub fn overutilization_stats(trace: &EpisodeTrace) -> (usize, f64) {
    let cap = trace.capacity;
    let mut events = 0;
    let mut overshoot = 0.0;
    for s in &trace.steps {
        for &u in &s.demand {
            if u > cap {
                events += 1;
                overshoot += (u - cap) as f64 / cap as f64;
            }
        }
    }
    (events, overshoot)
}

/// `(max, mean)` over timesteps of the number of machines hosting a running
/// job.
pub fn machines_used(trace: &EpisodeTrace) -> (usize, f64) {
    if trace.is_empty() {
        return (0, 0.0);
    }
    let counts: Vec<usize> =
        trace.steps.iter().map(|s| s.used.iter().filter(|&&u| u).count()).collect();
    let max = counts.iter().copied().max().unwrap_or(0);
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    (max, mean)
}

/// The four metric families for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub utilization: Vec<f64>,
    pub fragmentation: Vec<Option<f64>>,
    pub over_events: usize,
    pub overshoot: f64,
    pub max_machines: usize,
    pub mean_machines: f64,
}

impl EpisodeMetrics {
    pub fn compute(trace: &EpisodeTrace, clamp_util: bool) -> Self {
        let (over_events, overshoot) = overutilization_stats(trace);
        let (max_machines, mean_machines) = machines_used(trace);
        EpisodeMetrics {
            utilization: (0..trace.dims).map(|d| avg_utilization(trace, d, clamp_util)).collect(),
            fragmentation: (0..trace.dims).map(|d| avg_fragmentation(trace, d)).collect(),
            over_events,
            overshoot,
            max_machines,
            mean_machines,
        }
    }

    /// `(metric, dimension, value)` rows; absent fragmentation is skipped.
    pub fn rows(&self) -> Vec<(&'static str, String, f64)> {
        let mut rows = Vec::new();
        for (d, u) in self.utilization.iter().enumerate() {
            rows.push(("avg_utilization", d.to_string(), *u));
        }
        for (d, f) in self.fragmentation.iter().enumerate() {
            if let Some(f) = f {
                rows.push(("avg_fragmentation", d.to_string(), *f));
            }
        }
        rows.push(("over_events", "all".into(), self.over_events as f64));
        rows.push(("overshoot_sum", "all".into(), self.overshoot));
        rows.push(("machines_max", "all".into(), self.max_machines as f64));
        rows.push(("machines_mean", "all".into(), self.mean_machines));
        rows
    }
}
