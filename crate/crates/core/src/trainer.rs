//! REINFORCE with a per-timestep mean baseline.
//!
//! Each iteration samples `B` jobsets from the training catalog. A worker per
//! jobset runs `trajectories_per_jobset` sampled rollouts against a shared
//! parameter snapshot, subtracts the jobset's mean return at each timestep,
//! and sums `advantage * grad log pi` over its decisions. Worker gradients
//! are then added in worker-index order, divided by the total number of
//! decisions, and applied with one Adam step. Because the reduction order is
//! fixed, running the workers in parallel or one after another produces the
//! same bits.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::Encoder;
use crate::policy::{decode_action, sample_action, sparsify_into, Activations, AdamState, PolicyParams};
use crate::reward::{total_reward, RewardBreakdown, RewardWeights};
use crate::rng::{self, SimRng};
use crate::sim::{Catalog, ClusterState, SimConfig, WorkloadGenerator, WorkloadTrace};
use crate::{Error, Result};

/// How a timestep's reward is credited to the decisions of its round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// Every decision in a round sees the round's return; returns and the
    /// baseline are indexed by timestep.
    Shared,
    /// Only the last decision of a round receives the round's reward, the
    /// others receive 0; returns and the baseline are indexed by decision.
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub num_jobsets: usize,
    pub trajectories_per_jobset: usize,
    pub iterations: usize,
    /// Checkpoint period in iterations; 0 disables periodic checkpoints.
    pub eval_every: usize,
    /// One seed per jobset worker.
    pub seeds: Vec<u64>,
    pub jobset_load: f64,
    /// Arrival window of each training jobset, in timesteps.
    pub jobset_horizon: u32,
    pub attribution: Attribution,
    pub parallel: bool,
    pub log_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_jobsets: 10,
            trajectories_per_jobset: 20,
            iterations: 1500,
            eval_every: 100,
            seeds: (1..=10).collect(),
            jobset_load: 0.5,
            jobset_horizon: 50,
            attribution: Attribution::Shared,
            parallel: true,
            log_wall_clock: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("num_jobsets", self.num_jobsets),
            ("trajectories_per_jobset", self.trajectories_per_jobset),
            ("iterations", self.iterations),
            ("jobset_horizon", self.jobset_horizon as usize),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("train.{name} must be >= 1")));
            }
        }
        if self.seeds.len() != self.num_jobsets {
            return Err(Error::Config(format!(
                "train.seeds has {} entries, num_jobsets is {}",
                self.seeds.len(),
                self.num_jobsets
            )));
        }
        if !(self.jobset_load > 0.0 && self.jobset_load < 1.0) {
            return Err(Error::Config("train.jobset_load must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One policy decision with what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Nonzero entries of the state image.
    pub input: Vec<(u32, f64)>,
    pub acts: Activations,
    pub action: usize,
    /// Index of the timestep (0-based) whose round this decision belongs to.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub decisions: Vec<Decision>,
    /// One reward per logical timestep.
    pub rewards: Vec<f64>,
    pub breakdown: RewardBreakdown,
    /// Mean over timesteps of queued plus backlogged jobs.
    pub mean_queue_len: f64,
}

impl Trajectory {
    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Reward sequence used for credit assignment and, per decision, its
    /// index into that sequence.
    pub fn credit(&self, attribution: Attribution) -> (Vec<f64>, Vec<usize>) {
        match attribution {
            Attribution::Shared => {
                (self.rewards.clone(), self.decisions.iter().map(|d| d.round).collect())
            }
            Attribution::FinalOnly => {
                let mut credit = vec![0.0; self.decisions.len()];
                let mut last_of_round: Option<usize> = None;
                let mut next = 0;
                for (t, &r) in self.rewards.iter().enumerate() {
                    while next < self.decisions.len() && self.decisions[next].round == t {
                        last_of_round = Some(next);
                        next += 1;
                    }
                    // rounds without decisions credit the latest decision
                    if let Some(i) = last_of_round {
                        credit[i] += r;
                    }
                }
                (credit, (0..self.decisions.len()).collect())
            }
        }
    }
}

/// Discounted returns by backward recursion.
pub fn compute_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, &r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    out
}

/// `b[t]` = mean of `returns[t]` over the trajectories that reach `t`.
pub fn baseline(returns: &[Vec<f64>]) -> Vec<f64> {
    let len = returns.iter().map(Vec::len).max().unwrap_or(0);
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for r in returns {
        for (t, v) in r.iter().enumerate() {
            sum[t] += v;
            count[t] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}

/// Everything a rollout needs besides parameters, trace and randomness.
#[derive(Debug, Clone)]
pub struct RolloutContext {
    pub sim: SimConfig,
    pub weights: RewardWeights,
    pub encoder: Encoder,
}

/// One sampled episode under `params`.
pub fn rollout(
    ctx: &RolloutContext,
    trace: &WorkloadTrace,
    params: &PolicyParams,
    rng: &mut SimRng,
) -> Result<Trajectory> {
    let machines = ctx.sim.num_machines;
    let mut state = ClusterState::new(&ctx.sim, trace)?;
    let mut image = Vec::with_capacity(ctx.encoder.input_dim());
    let mut decisions = Vec::new();
    let mut rewards = Vec::new();
    let mut breakdown = RewardBreakdown::default();
    let mut queue_sum = 0usize;
    while !state.is_done() {
        let round = rewards.len();
        while state.awaiting_decision() {
            ctx.encoder.encode_into(&state, &mut image)?;
            let mut input = Vec::new();
            sparsify_into(&image, &mut input);
            let mut acts = Activations::new(params.shape());
            params.forward_sparse(&input, &mut acts);
            let action = sample_action(&acts.probs, rng);
            state.apply_action(decode_action(action, machines))?;
            decisions.push(Decision { input, acts, action, round });
        }
        let info = state.advance_time(trace);
        let r = total_reward(&info, &ctx.weights);
        queue_sum += info.queue_len + info.backlog_count;
        breakdown.add(&r);
        rewards.push(r.total);
    }
    let mean_queue_len = if rewards.is_empty() { 0.0 } else { queue_sum as f64 / rewards.len() as f64 };
    Ok(Trajectory { decisions, rewards, breakdown, mean_queue_len })
}

/// Summed `advantage * grad log pi` of one worker, plus its statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerOutput {
    pub grad: PolicyParams,
    pub decisions: usize,
    pub trajectories: usize,
    pub penalty_sum: f64,
    pub breakdown: RewardBreakdown,
    pub queue_len_sum: f64,
    pub length_sum: usize,
}

pub fn run_worker(
    ctx: &RolloutContext,
    attribution: Attribution,
    trace: &WorkloadTrace,
    params: &PolicyParams,
    rollout_seeds: &[u64],
) -> Result<WorkerOutput> {
    let trajectories = rollout_seeds
        .iter()
        .map(|&seed| rollout(ctx, trace, params, &mut rng::seeded(seed)))
        .collect::<Result<Vec<_>>>()?;
    let credits: Vec<(Vec<f64>, Vec<usize>)> =
        trajectories.iter().map(|t| t.credit(attribution)).collect();
    let returns: Vec<Vec<f64>> =
        credits.iter().map(|(r, _)| compute_returns(r, ctx.weights.gamma)).collect();
    let base = baseline(&returns);

    let mut grad = PolicyParams::zeros(params.shape());
    let mut scratch = vec![0.0; params.shape().hidden];
    let mut out = WorkerOutput {
        grad: PolicyParams::zeros(params.shape()),
        decisions: 0,
        trajectories: trajectories.len(),
        penalty_sum: 0.0,
        breakdown: RewardBreakdown::default(),
        queue_len_sum: 0.0,
        length_sum: 0,
    };
    for ((traj, (_, index)), ret) in trajectories.iter().zip(&credits).zip(&returns) {
        for (decision, &i) in traj.decisions.iter().zip(index) {
            let advantage = ret[i] - base[i];
            params.accumulate_grad(
                &decision.input,
                &decision.acts,
                decision.action,
                advantage,
                &mut grad,
                &mut scratch,
            );
        }
        out.decisions += traj.decisions.len();
        out.penalty_sum -= traj.total_return();
        out.breakdown.add(&traj.breakdown);
        out.queue_len_sum += traj.mean_queue_len;
        out.length_sum += traj.rewards.len();
    }
    out.grad = grad;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: u64,
    /// Mean over trajectories of the undiscounted total penalty.
    pub mean_penalty: f64,
    /// Mean per-trajectory sums of the weighted reward components.
    pub breakdown: RewardBreakdown,
    pub mean_queue_len: f64,
    pub mean_episode_len: f64,
    pub decisions: usize,
    pub wall_seconds: f64,
}

impl IterationStats {
    pub const CSV_HEADER: &'static str =
        "iteration,mean_penalty,r_contention,r_over,r_wait,r_under,mean_queue_len,wall_seconds";

    pub fn csv_row(&self) -> String {
        let b = &self.breakdown;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iteration, self.mean_penalty, b.contention, b.over, b.wait, b.under,
            self.mean_queue_len, self.wall_seconds
        )
    }
}

/// One parameter update from the given jobsets. `rollout_seeds[j]` holds the
/// per-trajectory seeds for jobset `j`.
pub fn train_iteration(
    ctx: &RolloutContext,
    attribution: Attribution,
    params: &mut PolicyParams,
    adam: &mut AdamState,
    jobsets: &[WorkloadTrace],
    rollout_seeds: &[Vec<u64>],
    parallel: bool,
    iteration: u64,
) -> Result<IterationStats> {
    assert_eq!(jobsets.len(), rollout_seeds.len());
    let snapshot: &PolicyParams = params;
    let work = |(trace, seeds): (&WorkloadTrace, &Vec<u64>)| {
        run_worker(ctx, attribution, trace, snapshot, seeds)
    };
    let outputs: Vec<WorkerOutput> = if parallel {
        jobsets.par_iter().zip(rollout_seeds.par_iter()).map(work).collect::<Result<_>>()?
    } else {
        jobsets.iter().zip(rollout_seeds.iter()).map(work).collect::<Result<_>>()?
    };

    let mut grad = PolicyParams::zeros(params.shape());
    let mut decisions = 0;
    let mut trajectories = 0;
    let mut penalty = 0.0;
    let mut breakdown = RewardBreakdown::default();
    let mut queue = 0.0;
    let mut length = 0;
    for w in &outputs {
        grad.add_assign(&w.grad);
        decisions += w.decisions;
        trajectories += w.trajectories;
        penalty += w.penalty_sum;
        breakdown.add(&w.breakdown);
        queue += w.queue_len_sum;
        length += w.length_sum;
    }
    if decisions > 0 {
        grad.scale(1.0 / decisions as f64);
    }
    adam.update(params, &grad).map_err(|e| match e {
        Error::NonFiniteGradient { .. } => Error::NonFiniteGradient { iteration },
        other => other,
    })?;
    let n = trajectories.max(1) as f64;
    breakdown.scale(1.0 / n);
    Ok(IterationStats {
        iteration,
        mean_penalty: penalty / n,
        breakdown,
        mean_queue_len: queue / n,
        mean_episode_len: length as f64 / n,
        decisions,
        wall_seconds: 0.0,
    })
}

/// Full training loop over resampled jobsets.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub ctx: RolloutContext,
    pub cfg: TrainConfig,
    pub catalog: Catalog,
    pub params: PolicyParams,
    pub adam: AdamState,
}

impl Trainer {
    pub fn new(ctx: RolloutContext, cfg: TrainConfig, catalog: Catalog, params: PolicyParams) -> Result<Self> {
        cfg.validate()?;
        if params.shape().input_dim != ctx.encoder.input_dim() {
            return Err(Error::Shape(format!(
                "network input {} does not match encoder output {}",
                params.shape().input_dim,
                ctx.encoder.input_dim()
            )));
        }
        let adam = AdamState::new(params.shape());
        Ok(Trainer { ctx, cfg, catalog, params, adam })
    }

    pub fn with_adam(mut self, adam: AdamState) -> Result<Self> {
        if adam.m.len() != self.params.as_slice().len() {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.adam = adam;
        Ok(self)
    }

    /// Iterations completed so far (one Adam step per iteration).
    pub fn completed(&self) -> u64 {
        self.adam.step_count
    }

    /// Jobset `j` of iteration `iteration`.
    pub fn jobset(&self, iteration: u64, j: usize) -> Result<WorkloadTrace> {
        let sim = &self.ctx.sim;
        let gen = WorkloadGenerator::new(&self.catalog, sim.num_machines, sim.capacity, sim.num_dims);
        let seed = rng::derive(self.cfg.seeds[j], &[iteration]);
        gen.generate(self.cfg.jobset_load, self.cfg.jobset_horizon, seed)
    }

    pub fn rollout_seeds(&self, iteration: u64, j: usize) -> Vec<u64> {
        (0..self.cfg.trajectories_per_jobset as u64)
            .map(|r| rng::derive(self.cfg.seeds[j], &[iteration, r + 1]))
            .collect()
    }

    pub fn step(&mut self) -> Result<IterationStats> {
        let start = Instant::now();
        let iteration = self.completed();
        let jobsets = (0..self.cfg.num_jobsets)
            .map(|j| self.jobset(iteration, j))
            .collect::<Result<Vec<_>>>()?;
        let seeds: Vec<Vec<u64>> =
            (0..self.cfg.num_jobsets).map(|j| self.rollout_seeds(iteration, j)).collect();
        let mut stats = train_iteration(
            &self.ctx,
            self.cfg.attribution,
            &mut self.params,
            &mut self.adam,
            &jobsets,
            &seeds,
            self.cfg.parallel,
            iteration,
        )?;
        if self.cfg.log_wall_clock {
            stats.wall_seconds = start.elapsed().as_secs_f64();
        }
        Ok(stats)
    }

    /// Runs until `cfg.iterations` updates have been applied, calling
    /// `on_iteration` after each.
    pub fn run<F>(&mut self, mut on_iteration: F) -> Result<Vec<IterationStats>>
    where
        F: FnMut(&Trainer, &IterationStats) -> Result<()>,
    {
        let mut log = Vec::new();
        while (self.completed() as usize) < self.cfg.iterations {
            let stats = self.step()?;
            on_iteration(self, &stats)?;
            log.push(stats);
        }
        Ok(log)
    }
}
