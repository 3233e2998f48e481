#![allow(dead_code)]

pub mod lookahead;
pub mod scenarios;

use std::collections::BTreeMap;
use std::sync::Arc;

use placelab::policy::{NetShape, PolicyParams};
use placelab::reward::{cross_correlation, total_reward, RewardBreakdown, RewardWeights};
use placelab::rng::{self, SimRng};
use placelab::sim::{
    sample_job_profile, ClusterState, GenParams, JobProfile, PlacementAction, SimConfig, StepInfo,
    TraceJob, WorkloadTrace,
};
use rand::Rng;

/// A small randomized instance: config, trace and the seed driving actions.
#[derive(Debug, Clone)]
pub struct Instance {
    pub sim: SimConfig,
    pub trace: WorkloadTrace,
    pub action_seed: u64,
}

pub fn small_instance(seed: u64, machines: usize, jobs: usize, steps: u32) -> Instance {
    let mut r = rng::seeded(seed);
    let sim = SimConfig {
        num_machines: machines,
        episode_horizon: steps,
        queue_slots: r.random_range(1..=4),
        sched_slots: r.random_range(1..=3),
        history_depth: r.random_range(1..=4),
        ..Default::default()
    };
    let params = GenParams::default();
    let mut arrivals: Vec<u32> = (0..jobs).map(|_| r.random_range(0..steps.max(1))).collect();
    arrivals.sort_unstable();
    let jobs = arrivals
        .into_iter()
        .enumerate()
        .map(|(i, arrival)| {
            let mut profile = sample_job_profile(&params, r.random_range(0..8), &mut r);
            profile.job_id = i as u64;
            TraceJob { arrival, profile }
        })
        .collect();
    let trace = WorkloadTrace {
        jobs,
        load_target: 0.5,
        seed,
        machines: machines as u32,
        capacity: sim.capacity,
    };
    Instance { sim, trace, action_seed: seed ^ 0x5eed }
}

/// Uniform over machines plus Hold.
pub fn random_action(r: &mut SimRng, machines: usize) -> PlacementAction {
    let i = r.random_range(0..=machines);
    if i == machines {
        PlacementAction::Hold
    } else {
        PlacementAction::Place(i + 1)
    }
}

/// Start time, machine and profile of every job that ever ran.
pub type Placements = BTreeMap<u64, (usize, u32, Arc<JobProfile>)>;

pub struct Run {
    pub steps: Vec<StepInfo>,
    pub rewards: Vec<RewardBreakdown>,
    pub placements: Placements,
    pub actions: Vec<PlacementAction>,
    pub last_clock: u32,
}

/// Drives an instance with random actions, calling `inspect` after every
/// timestep.
pub fn run_random<F>(inst: &Instance, weights: &RewardWeights, mut inspect: F) -> Run
where
    F: FnMut(&ClusterState, &StepInfo),
{
    let mut state = ClusterState::new(&inst.sim, &inst.trace).unwrap();
    let mut r = rng::seeded(inst.action_seed);
    let mut run = Run {
        steps: Vec::new(),
        rewards: Vec::new(),
        placements: BTreeMap::new(),
        actions: Vec::new(),
        last_clock: 0,
    };
    while !state.is_done() {
        while state.awaiting_decision() {
            let a = random_action(&mut r, inst.sim.num_machines);
            run.actions.push(a);
            state.apply_action(a).unwrap();
        }
        let info = state.advance_time(&inst.trace);
        for m in &state.machines {
            for job in &m.running {
                run.placements
                    .entry(job.instance_id)
                    .or_insert((m.index, job.start_time.unwrap(), job.profile.clone()));
            }
        }
        inspect(&state, &info);
        run.rewards.push(total_reward(&info, weights));
        run.last_clock = info.clock;
        run.steps.push(info);
    }
    run
}

/// Σ over co-located pairs and dimensions of the pair's cross-correlation,
/// clipped to the simulated window.
pub fn pairwise_oracle(run: &Run, dims: usize, capacity: u32) -> f64 {
    let jobs: Vec<_> = run.placements.values().collect();
    let end = run.last_clock + 1;
    let mut total = 0.0;
    for (a, (ma, sa, pa)) in jobs.iter().enumerate() {
        for (mb, sb, pb) in &jobs[a + 1..] {
            if ma != mb {
                continue;
            }
            let mut ca = (**pa).clone();
            let mut cb = (**pb).clone();
            // clip lengths to the episode end
            ca.length = ca.length.min(end - sa);
            cb.length = cb.length.min(end - sb);
            for d in 0..dims {
                total += cross_correlation(&ca, *sa, &cb, *sb, d, capacity);
            }
        }
    }
    total
}

/// Relative error between the analytic score gradient and central finite
/// differences on a random small network.
pub fn finite_difference_error(seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let shape = NetShape {
        input_dim: r.random_range(1..=50),
        hidden: r.random_range(1..=10),
        actions: r.random_range(2..=8),
    };
    let mut params = PolicyParams::init(shape, &mut r);
    for b in params.b1_mut() {
        *b = r.random_range(-0.5..0.5);
    }
    let x: Vec<f64> = (0..shape.input_dim)
        .map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(-2.0..2.0) })
        .collect();
    let action = r.random_range(0..shape.actions);
    let grad = params.grad_log_prob(&x, action, 1.0).unwrap();
    let h = 1e-6;
    let mut diff = 0.0;
    let mut norm = 0.0f64;
    let mut fd_norm = 0.0f64;
    for i in 0..shape.num_params() {
        let orig = params.as_slice()[i];
        params.as_mut_slice()[i] = orig + h;
        let up = params.log_prob(&x, action).unwrap();
        params.as_mut_slice()[i] = orig - h;
        let down = params.log_prob(&x, action).unwrap();
        params.as_mut_slice()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let g = grad.as_slice()[i];
        diff += (g - fd).powi(2);
        norm += g * g;
        fd_norm += fd * fd;
    }
    let scale = norm.sqrt().max(fd_norm.sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}
