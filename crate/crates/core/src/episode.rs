//! Drives a placement policy through an episode using the decision-round
//! protocol and records the resulting [`EpisodeTrace`].

use crate::encoder::Encoder;
use crate::metrics::EpisodeTrace;
use crate::policy::{argmax, decode_action, sample_action, sparsify_into, Activations, PolicyParams};
use crate::reward::{total_reward, RewardWeights};
use crate::rng::SimRng;
use crate::sim::{ClusterState, PlacementAction, SimConfig, WorkloadTrace};
use crate::{Error, Result};

/// Anything that can choose a placement for the queue head.
pub trait PlacementPolicy {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction>;
}

impl<P: PlacementPolicy + ?Sized> PlacementPolicy for &mut P {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction> {
        (**self).decide(state)
    }
}

pub fn run_episode(
    sim: &SimConfig,
    weights: &RewardWeights,
    trace: &WorkloadTrace,
    policy: &mut dyn PlacementPolicy,
) -> Result<EpisodeTrace> {
    let mut state = ClusterState::new(sim, trace)?;
    let mut out = EpisodeTrace::new(sim.num_machines, sim.num_dims, sim.capacity);
    while !state.is_done() {
        while state.awaiting_decision() {
            let action = policy.decide(&state)?;
            state.apply_action(action)?;
        }
        let info = state.advance_time(trace);
        out.record(&info, total_reward(&info, weights));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum ActionSelection {
    /// Highest-probability action; lowest index on ties.
    Greedy,
    Sample(SimRng),
}

/// The learned policy: encode, forward, then argmax or sample.
#[derive(Debug, Clone)]
pub struct NetworkPolicy {
    pub params: PolicyParams,
    pub encoder: Encoder,
    pub selection: ActionSelection,
    image: Vec<f64>,
    sparse: Vec<(u32, f64)>,
    acts: Activations,
}

impl NetworkPolicy {
    pub fn new(params: PolicyParams, encoder: Encoder, selection: ActionSelection) -> Result<Self> {
        if params.shape().input_dim != encoder.input_dim() {
            return Err(Error::Shape(format!(
                "network input {} does not match encoder output {}",
                params.shape().input_dim,
                encoder.input_dim()
            )));
        }
        let acts = Activations::new(params.shape());
        Ok(NetworkPolicy { params, encoder, selection, image: Vec::new(), sparse: Vec::new(), acts })
    }

    pub fn greedy(params: PolicyParams, encoder: Encoder) -> Result<Self> {
        Self::new(params, encoder, ActionSelection::Greedy)
    }

    /// Action probabilities for the current state.
    pub fn probabilities(&mut self, state: &ClusterState) -> Result<&[f64]> {
        self.encoder.encode_into(state, &mut self.image)?;
        sparsify_into(&self.image, &mut self.sparse);
        self.params.forward_sparse(&self.sparse, &mut self.acts);
        Ok(&self.acts.probs)
    }
}

impl PlacementPolicy for NetworkPolicy {
    fn decide(&mut self, state: &ClusterState) -> Result<PlacementAction> {
        let machines = state.config().num_machines;
        if self.params.shape().actions < machines {
            return Err(Error::Shape(format!(
                "network has {} outputs for {machines} machines",
                self.params.shape().actions
            )));
        }
        self.probabilities(state)?;
        let index = match &mut self.selection {
            ActionSelection::Greedy => argmax(&self.acts.probs),
            ActionSelection::Sample(rng) => sample_action(&self.acts.probs, rng),
        };
        Ok(decode_action(index, machines))
    }
}
