//! Jobs, machines, and the cluster environment.

mod cluster;
mod profile;
mod workload;

pub use cluster::{
    ActionOutcome, ClusterState, JobInstance, MachineState, Occupant, PlacementAction, StepInfo,
    UsageRow,
};
pub use profile::{
    fraction_to_units, round_half_up, sample_job_profile, square_wave_shape, Catalog, CatalogKind,
    DimProfile, GenParams, JobProfile, STANDARD_NUM_TYPES, TEST_CATALOG_SIZE, TRAIN_CATALOG_SIZE,
};
pub use workload::{
    calibrate_arrival_rate, offered_load, ChainRule, TraceJob, WorkloadGenerator, WorkloadTrace,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Static parameters of the simulated cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_machines: usize,
    /// Resource units per machine, identical in every dimension.
    pub capacity: u32,
    pub num_dims: usize,
    /// Rows of usage history per machine in the state image.
    pub history_depth: usize,
    pub queue_slots: usize,
    /// Committed-job slots per machine.
    pub sched_slots: usize,
    pub episode_horizon: u32,
    /// 0 means "same as `queue_slots`".
    pub max_decisions_per_step: usize,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_machines: 10,
            capacity: 10,
            num_dims: 2,
            history_depth: 4,
            queue_slots: 10,
            sched_slots: 5,
            episode_horizon: 200,
            max_decisions_per_step: 0,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_machines", self.num_machines),
            ("capacity", self.capacity as usize),
            ("num_dims", self.num_dims),
            ("history_depth", self.history_depth),
            ("queue_slots", self.queue_slots),
            ("sched_slots", self.sched_slots),
            ("episode_horizon", self.episode_horizon as usize),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("sim.{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn decision_cap(&self) -> usize {
        if self.max_decisions_per_step == 0 {
            self.queue_slots
        } else {
            self.max_decisions_per_step
        }
    }
}
