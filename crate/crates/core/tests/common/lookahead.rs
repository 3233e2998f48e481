use placelab::episode::PlacementPolicy;
use placelab::reward::RewardWeights;
use placelab::sim::{ClusterState, JobInstance, MachineState, PlacementAction};
use placelab::Result;

/// Hand-set reference policy: places the queue head on the machine where
/// the weighted contention, over-utilization and under-utilization penalties
/// accrued over the job's lifetime grow the least. Uses the true profiles of
/// resident jobs, so it needs no training.
pub struct Lookahead {
    pub weights: RewardWeights,
}

impl Lookahead {
    /// Change in penalty from starting `job` on `machine` at `start`.
    pub fn marginal_cost(&self, state: &ClusterState, machine: &MachineState, job: &JobInstance) -> f64 {
        let cfg = state.config();
        let cap = cfg.capacity as f64;
        let start = state.clock + 1;
        let residents: Vec<(&JobInstance, u32)> = machine
            .running
            .iter()
            .map(|j| (j, j.start_time.unwrap()))
            .chain(machine.committed.iter().map(|j| (j, start)))
            .collect();
        let w = &self.weights;
        let mut cost = 0.0;
        for t in start..start + job.profile.length {
            let active: Vec<(&JobInstance, u32)> = residents
                .iter()
                .copied()
                .filter(|(j, s)| t >= *s && t < s + j.profile.length)
                .collect();
            for d in 0..cfg.num_dims {
                let own = job.profile.usage_at(t - start, d).unwrap();
                let others: u32 = active.iter().map(|(j, s)| j.profile.usage_at(t - s, d).unwrap()).sum();
                cost += w.w_contention * (own as f64 / cap) * (others as f64 / cap);
                let over_before = others > cfg.capacity;
                let over_after = others + own > cfg.capacity;
                if over_after && !over_before {
                    cost += w.w_over;
                }
                let free_before = if active.is_empty() { 0.0 } else { (cfg.capacity.saturating_sub(others)) as f64 / cap };
                let free_after = cfg.capacity.saturating_sub(others + own) as f64 / cap;
                cost += w.w_under * (free_after - free_before);
            }
        }
        cost
    }
}

impl PlacementPolicy for Lookahead {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction> {
        let Some(job) = state.queue_head() else {
            return Ok(PlacementAction::Hold);
        };
        let mut best: Option<(usize, f64)> = None;
        for m in &state.machines {
            if m.committed.len() >= state.config().sched_slots {
                continue;
            }
            let c = self.marginal_cost(state, m, job);
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((m.index, c));
            }
        }
        Ok(best.map_or(PlacementAction::Hold, |(m, _)| PlacementAction::Place(m)))
    }
}
