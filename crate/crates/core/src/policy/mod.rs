//! The policy network, its policy-gradient backward pass, Adam, and the
//! checkpoint format.

mod adam;
mod checkpoint;
mod net;

pub use adam::{AdamState, BETA1, BETA2, EPSILON, LEARNING_RATE};
pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use net::{
    argmax, sample_action, softmax_into, sparsify, sparsify_into, Activations, NetShape,
    PolicyParams,
};

use serde::{Deserialize, Serialize};

use crate::sim::{PlacementAction, SimConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden_units: usize,
    /// Adds a Hold output after the N machine outputs.
    pub allow_hold: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { hidden_units: 20, allow_hold: true }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_units == 0 {
            return Err(Error::Config("policy.hidden_units must be >= 1".into()));
        }
        Ok(())
    }

    pub fn num_actions(&self, sim: &SimConfig) -> usize {
        sim.num_machines + usize::from(self.allow_hold)
    }

    pub fn shape(&self, sim: &SimConfig, input_dim: usize) -> NetShape {
        NetShape { input_dim, hidden: self.hidden_units, actions: self.num_actions(sim) }
    }
}

/// Output index `i < N` places on machine `i + 1`; index `N` is Hold.
pub fn decode_action(index: usize, num_machines: usize) -> PlacementAction {
    if index < num_machines {
        PlacementAction::Place(index + 1)
    } else {
        PlacementAction::Hold
    }
}

pub fn encode_action(action: PlacementAction, num_machines: usize) -> usize {
    match action {
        PlacementAction::Place(m) => m - 1,
        PlacementAction::Hold => num_machines,
    }
}
