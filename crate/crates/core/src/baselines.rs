//! Heuristic placement: Tetris alignment, BestFit on the dominant resource,
//! and uniform Random.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::episode::PlacementPolicy;
use crate::rng::{self, SimRng};
use crate::sim::{ClusterState, JobInstance, MachineState, PlacementAction};
use crate::{Error, Result};

/// How Tetris measures a machine's free capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    /// Capacity minus the demand observed at the current timestep (plus the
    /// first-step demand of jobs committed this round).
    Instantaneous,
    /// Capacity minus the summed peaks of resident and committed jobs.
    PeakReserved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicConfig {
    pub tetris_duration_weight: f64,
    pub require_peak_fit: bool,
    pub tetris_availability: Availability,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            tetris_duration_weight: 1.0,
            require_peak_fit: true,
            tetris_availability: Availability::PeakReserved,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tetris_duration_weight.is_finite() && self.tetris_duration_weight >= 0.0) {
            return Err(Error::Config("heuristic.tetris_duration_weight must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Demand on `machine` in dimension `d` right now, counting jobs committed in
/// this round at their first-step demand.
pub fn instantaneous_demand(machine: &MachineState, d: usize) -> u32 {
    let committed: u32 = machine.committed.iter().map(|j| j.profile.demand(0, d)).sum();
    machine.current_demand(d) + committed
}

pub fn reserved_demand(machine: &MachineState, d: usize) -> u32 {
    machine.running.iter().chain(&machine.committed).map(|j| j.profile.peak(d)).sum()
}

fn has_free_slot(state: &ClusterState, machine: &MachineState) -> bool {
    machine.committed.len() < state.config().sched_slots
}

pub fn tetris_place(state: &ClusterState, job: &JobInstance, cfg: &HeuristicConfig) -> PlacementAction {
    let cap = state.config().capacity;
    let capf = cap as f64;
    let dims = state.config().num_dims;
    let duration = cfg.tetris_duration_weight / job.profile.length as f64;
    let mut best: Option<(usize, f64)> = None;
    for machine in &state.machines {
        if !has_free_slot(state, machine) {
            continue;
        }
        let avail: Vec<u32> = (0..dims)
            .map(|d| {
                let used = match cfg.tetris_availability {
                    Availability::Instantaneous => instantaneous_demand(machine, d),
                    Availability::PeakReserved => reserved_demand(machine, d),
                };
                cap.saturating_sub(used)
            })
            .collect();
        if cfg.require_peak_fit && (0..dims).any(|d| job.profile.peak(d) > avail[d]) {
            continue;
        }
        let alignment: f64 =
            (0..dims).map(|d| job.profile.peak(d) as f64 / capf * avail[d] as f64 / capf).sum();
        let score = alignment + duration;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((machine.index, score));
        }
    }
    best.map_or(PlacementAction::Hold, |(m, _)| PlacementAction::Place(m))
}

/// The machine with the least positive free capacity in the job's dominant
/// dimension, ignoring peaks and future demand.
pub fn bestfit_place(state: &ClusterState, job: &JobInstance) -> PlacementAction {
    let cap = state.config().capacity;
    let d = job.profile.dominant_dim;
    let mut best: Option<(usize, u32)> = None;
    for machine in &state.machines {
        if !has_free_slot(state, machine) {
            continue;
        }
        let avail = cap.saturating_sub(instantaneous_demand(machine, d));
        if avail > 0 && best.is_none_or(|(_, a)| avail < a) {
            best = Some((machine.index, avail));
        }
    }
    best.map_or(PlacementAction::Hold, |(m, _)| PlacementAction::Place(m))
}

pub fn random_place<R: Rng + ?Sized>(state: &ClusterState, rng: &mut R) -> PlacementAction {
    PlacementAction::Place(rng.random_range(1..=state.config().num_machines))
}

#[derive(Debug, Clone, Default)]
pub struct Tetris {
    pub cfg: HeuristicConfig,
}

impl PlacementPolicy for Tetris {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction> {
        Ok(state.queue_head().map_or(PlacementAction::Hold, |job| tetris_place(state, job, &self.cfg)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BestFit;

impl PlacementPolicy for BestFit {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction> {
        Ok(state.queue_head().map_or(PlacementAction::Hold, |job| bestfit_place(state, job)))
    }
}

#[derive(Debug, Clone)]
pub struct RandomPlacement {
    rng: SimRng,
}

impl RandomPlacement {
    pub fn new(seed: u64) -> Self {
        RandomPlacement { rng: rng::seeded(seed) }
    }
}

impl PlacementPolicy for RandomPlacement {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction> {
        Ok(random_place(state, &mut self.rng))
    }
}
