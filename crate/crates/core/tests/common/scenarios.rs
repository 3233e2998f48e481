//! Two-job placement scenarios: one job already runs on machine 1 of an
//! otherwise empty two-machine cluster and a second job waits at the queue
//! head.

use placelab::sim::{ClusterState, DimProfile, JobProfile, PlacementAction, SimConfig, TraceJob, WorkloadTrace};

pub struct Scenario {
    pub name: &'static str,
    pub sim: SimConfig,
    pub trace: WorkloadTrace,
    /// Whether a contention-aware placer should share machine 1.
    pub expect_colocated: bool,
}

fn wave(peak: u32, period: u32, width: u32, phase: u32) -> DimProfile {
    DimProfile { peak, valley: 1, period, width, phase }
}

fn job(id: u64, arrival: u32, length: u32, dim0: DimProfile) -> TraceJob {
    TraceJob {
        arrival,
        profile: JobProfile {
            job_id: id,
            type_id: id as u32,
            length,
            dims: vec![dim0, DimProfile::constant(1)],
            dominant_dim: 0,
        },
    }
}

fn scenario(name: &'static str, jobs: Vec<TraceJob>, expect_colocated: bool) -> Scenario {
    let sim = SimConfig { num_machines: 2, episode_horizon: 60, ..Default::default() };
    let trace = WorkloadTrace { jobs, load_target: 0.5, seed: 0, machines: 2, capacity: 10 };
    Scenario { name, sim, trace, expect_colocated }
}

/// Job 1 peaks for its first 3 steps; job 2 starts after that and peaks
/// while job 1 idles.
pub fn sequential_peaks() -> Scenario {
    scenario(
        "peak of job 1 ends before job 2 begins",
        vec![job(0, 0, 8, wave(7, 8, 3, 0)), job(1, 3, 8, wave(7, 8, 3, 0))],
        true,
    )
}

/// Period-4 square waves half a period apart.
pub fn alternating_phases() -> Scenario {
    scenario(
        "complementary alternating phases",
        vec![job(0, 0, 16, wave(7, 4, 2, 0)), job(1, 4, 8, wave(7, 4, 2, 2))],
        true,
    )
}

/// Same waves as [`alternating_phases`] with the peaks lined up.
pub fn aligned_phases() -> Scenario {
    scenario(
        "aligned phases",
        vec![job(0, 0, 16, wave(7, 4, 2, 0)), job(1, 4, 8, wave(7, 4, 2, 0))],
        false,
    )
}

impl Scenario {
    /// State at the moment the second job heads the queue, with the first
    /// job running on machine 1.
    pub fn decision_state(&self) -> ClusterState {
        let mut state = ClusterState::new(&self.sim, &self.trace).unwrap();
        state.apply_action(PlacementAction::Place(1)).unwrap();
        let second = self.trace.jobs[1].arrival;
        while state.clock < second {
            state.advance_time(&self.trace);
        }
        assert_eq!(state.queue_head().map(|j| j.profile.job_id), Some(1));
        state
    }
}
