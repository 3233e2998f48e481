//! The cluster environment: machines, queue, decision rounds and the
//! per-timestep transition.

use std::collections::VecDeque;
use std::sync::Arc;

use smallvec::SmallVec;

use super::profile::JobProfile;
use super::workload::WorkloadTrace;
use super::SimConfig;
use crate::{Error, Result};

/// Per-dimension units; two dimensions are the common case.
pub type Units = SmallVec<[u32; 2]>;

#[derive(Debug, Clone, PartialEq)]
pub struct JobInstance {
    pub instance_id: u64,
    pub profile: Arc<JobProfile>,
    pub arrival_time: u32,
    pub start_time: Option<u32>,
    /// 1-based machine index.
    pub machine: Option<usize>,
}

impl JobInstance {
    pub fn type_id(&self) -> u32 {
        self.profile.type_id
    }
}

/// One instance's demand inside a usage row.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupant {
    pub instance_id: u64,
    pub type_id: u32,
    pub units: Units,
}

/// Demand on one machine at one timestep. Occupants are in (start time,
/// instance id) order.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageRow {
    pub clock: u32,
    pub occupants: Vec<Occupant>,
    /// Unclamped total per dimension.
    pub totals: Units,
}

impl UsageRow {
    fn empty(clock: u32, dims: usize) -> Self {
        UsageRow { clock, occupants: Vec::new(), totals: SmallVec::from_elem(0, dims) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    /// 1-based.
    pub index: usize,
    /// In (start time, instance id) order.
    pub running: Vec<JobInstance>,
    /// Placed during the current decision round; not yet consuming resources.
    pub committed: Vec<JobInstance>,
    /// The last `min(k, elapsed)` rows, oldest first.
    pub history: VecDeque<UsageRow>,
}

impl MachineState {
    pub fn is_used(&self) -> bool {
        !self.running.is_empty()
    }

    /// Demand recorded for the current clock (zero before the first step).
    pub fn current_demand(&self, d: usize) -> u32 {
        self.history.back().map_or(0, |row| row.totals[d])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementAction {
    /// 1-based machine index.
    Place(usize),
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionOutcome {
    Placed { machine: usize, instance_id: u64 },
    /// Hold, or Place on an empty queue. Ends the round.
    Held,
    /// The target machine had no free committed slot; treated as Hold.
    SlotOverflow { machine: usize },
}

/// What happened during one `advance_time` call, as seen by the reward and
/// metrics modules.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// The new clock value.
    pub clock: u32,
    pub capacity: u32,
    /// One row per machine, in machine order.
    pub machines: Vec<UsageRow>,
    /// Jobs left waiting when the round closed (before new arrivals).
    pub queue_len: usize,
    pub backlog_count: usize,
    pub placements: usize,
    pub slot_overflows: usize,
    pub arrivals: usize,
    pub finished: usize,
}

impl StepInfo {
    pub fn num_dims(&self) -> usize {
        self.machines.first().map_or(0, |r| r.totals.len())
    }

    pub fn demand(&self, m: usize, d: usize) -> u32 {
        self.machines[m].totals[d]
    }

    pub fn is_used(&self, m: usize) -> bool {
        !self.machines[m].occupants.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    cfg: SimConfig,
    pub machines: Vec<MachineState>,
    /// Visible queue, at most `queue_slots` long.
    pub queue: VecDeque<JobInstance>,
    /// Arrivals beyond the visible queue, FIFO.
    pub backlog: VecDeque<JobInstance>,
    pub clock: u32,
    round_finished: bool,
    decisions_this_round: usize,
    placements_this_round: usize,
    overflows_this_round: usize,
    next_arrival: usize,
    arrived: usize,
    finished: usize,
    trace_len: usize,
}

impl ClusterState {
    /// Empty cluster at clock 0 with the trace's time-0 arrivals enqueued.
    pub fn new(cfg: &SimConfig, trace: &WorkloadTrace) -> Result<Self> {
        cfg.validate()?;
        if let Some(job) = trace.jobs.iter().find(|j| j.profile.num_dims() != cfg.num_dims) {
            return Err(Error::Shape(format!(
                "job {} has {} dimensions, cluster has {}",
                job.profile.job_id,
                job.profile.num_dims(),
                cfg.num_dims
            )));
        }
        let machines = (1..=cfg.num_machines)
            .map(|index| MachineState {
                index,
                running: Vec::new(),
                committed: Vec::new(),
                history: VecDeque::with_capacity(cfg.history_depth + 1),
            })
            .collect();
        let mut state = ClusterState {
            cfg: cfg.clone(),
            machines,
            queue: VecDeque::with_capacity(cfg.queue_slots),
            backlog: VecDeque::new(),
            clock: 0,
            round_finished: false,
            decisions_this_round: 0,
            placements_this_round: 0,
            overflows_this_round: 0,
            next_arrival: 0,
            arrived: 0,
            finished: 0,
            trace_len: trace.jobs.len(),
        };
        state.admit_arrivals(trace);
        Ok(state)
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn queue_head(&self) -> Option<&JobInstance> {
        self.queue.front()
    }

    pub fn backlog_count(&self) -> usize {
        self.backlog.len()
    }

    pub fn round_finished(&self) -> bool {
        self.round_finished
    }

    /// True while the current round still wants a decision for the queue
    /// head.
    pub fn awaiting_decision(&self) -> bool {
        !self.round_finished
            && !self.queue.is_empty()
            && self.decisions_this_round < self.cfg.decision_cap()
    }

    pub fn arrived(&self) -> usize {
        self.arrived
    }

    pub fn finished(&self) -> usize {
        self.finished
    }

    pub fn committed_count(&self) -> usize {
        self.machines.iter().map(|m| m.committed.len()).sum()
    }

    pub fn running_count(&self) -> usize {
        self.machines.iter().map(|m| m.running.len()).sum()
    }

    /// Episode end: the horizon is reached, or every job of a non-empty
    /// trace has run to completion.
    pub fn is_done(&self) -> bool {
        if self.clock >= self.cfg.episode_horizon {
            return true;
        }
        self.trace_len > 0 && self.finished == self.trace_len
    }

    pub fn apply_action(&mut self, action: PlacementAction) -> Result<ActionOutcome> {
        if let PlacementAction::Place(m) = action {
            if m == 0 || m > self.cfg.num_machines {
                return Err(Error::Domain(format!(
                    "machine {m} out of range 1..={}",
                    self.cfg.num_machines
                )));
            }
        }
        if self.round_finished {
            return Ok(ActionOutcome::Held);
        }
        let m = match action {
            PlacementAction::Hold => {
                self.round_finished = true;
                return Ok(ActionOutcome::Held);
            }
            PlacementAction::Place(m) => m,
        };
        if self.queue.is_empty() {
            self.round_finished = true;
            return Ok(ActionOutcome::Held);
        }
        if self.machines[m - 1].committed.len() >= self.cfg.sched_slots {
            self.round_finished = true;
            self.overflows_this_round += 1;
            return Ok(ActionOutcome::SlotOverflow { machine: m });
        }
        let mut job = self.queue.pop_front().expect("queue checked non-empty");
        if let Some(next) = self.backlog.pop_front() {
            self.queue.push_back(next);
        }
        job.machine = Some(m);
        let instance_id = job.instance_id;
        self.machines[m - 1].committed.push(job);
        self.decisions_this_round += 1;
        self.placements_this_round += 1;
        if self.queue.is_empty() || self.decisions_this_round >= self.cfg.decision_cap() {
            self.round_finished = true;
        }
        Ok(ActionOutcome::Placed { machine: m, instance_id })
    }

    /// Closes the round and moves the clock forward one timestep.
    pub fn advance_time(&mut self, trace: &WorkloadTrace) -> StepInfo {
        let queue_len = self.queue.len();
        let backlog_count = self.backlog.len();
        self.clock += 1;
        let clock = self.clock;
        let dims = self.cfg.num_dims;
        let depth = self.cfg.history_depth;
        let mut finished = 0;
        let mut rows = Vec::with_capacity(self.machines.len());
        for machine in &mut self.machines {
            let before = machine.running.len();
            machine.running.retain(|job| {
                clock - job.start_time.expect("running job has a start time") < job.profile.length
            });
            finished += before - machine.running.len();
            let mut starting = std::mem::take(&mut machine.committed);
            starting.sort_by_key(|job| job.instance_id);
            for mut job in starting {
                job.start_time = Some(clock);
                machine.running.push(job);
            }
            let mut row = UsageRow::empty(clock, dims);
            row.occupants.reserve(machine.running.len());
            for job in &machine.running {
                let t_local = clock - job.start_time.expect("running job has a start time");
                let units: Units = (0..dims).map(|d| job.profile.demand(t_local, d)).collect();
                for (total, u) in row.totals.iter_mut().zip(&units) {
                    *total += u;
                }
                row.occupants.push(Occupant {
                    instance_id: job.instance_id,
                    type_id: job.profile.type_id,
                    units,
                });
            }
            if machine.history.len() == depth {
                machine.history.pop_front();
            }
            machine.history.push_back(row.clone());
            rows.push(row);
        }
        self.finished += finished;
        let arrivals = self.admit_arrivals(trace);
        let info = StepInfo {
            clock,
            capacity: self.cfg.capacity,
            machines: rows,
            queue_len,
            backlog_count,
            placements: self.placements_this_round,
            slot_overflows: self.overflows_this_round,
            arrivals,
            finished,
        };
        self.round_finished = false;
        self.decisions_this_round = 0;
        self.placements_this_round = 0;
        self.overflows_this_round = 0;
        info
    }

    fn admit_arrivals(&mut self, trace: &WorkloadTrace) -> usize {
        let mut count = 0;
        while let Some(job) = trace.jobs.get(self.next_arrival) {
            if job.arrival > self.clock {
                break;
            }
            let instance = JobInstance {
                instance_id: job.profile.job_id,
                profile: Arc::new(job.profile.clone()),
                arrival_time: job.arrival,
                start_time: None,
                machine: None,
            };
            if self.queue.len() < self.cfg.queue_slots {
                self.queue.push_back(instance);
            } else {
                self.backlog.push_back(instance);
            }
            self.next_arrival += 1;
            count += 1;
        }
        self.arrived += count;
        count
    }
}
