//! Run configuration: one TOML file with a section per module.
//!
//! Every section is optional and every key has a default; unknown keys are
//! rejected. [`RunConfig::to_toml`] emits the effective configuration, and
//! parsing that output yields the same value.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::HeuristicConfig;
use crate::encoder::{ColorScheme, Encoder};
use crate::policy::PolicyConfig;
use crate::reward::RewardWeights;
use crate::sim::{ChainRule, GenParams, SimConfig};
use crate::trainer::{RolloutContext, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    DeepPlace,
    Tetris,
    BestFit,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] =
        [PolicyKind::DeepPlace, PolicyKind::Tetris, PolicyKind::BestFit, PolicyKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::DeepPlace => "deepplace",
            PolicyKind::Tetris => "tetris",
            PolicyKind::BestFit => "bestfit",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy '{s}'")))
    }
}

/// Job generator settings; capacity and dimension count come from `[sim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub short_length: (u32, u32),
    pub long_length: (u32, u32),
    pub long_fraction: f64,
    pub dominant_peak: (f64, f64),
    pub other_peak: (f64, f64),
    pub period_fraction: (f64, f64),
    pub valley_fraction: f64,
    /// Probability that an arrival triggers a follow-up job; 0 disables.
    pub chain_probability: f64,
    pub chain_delay: u32,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        let g = GenParams::default();
        WorkloadConfig {
            short_length: g.short_length,
            long_length: g.long_length,
            long_fraction: g.long_fraction,
            dominant_peak: g.dominant_peak,
            other_peak: g.other_peak,
            period_fraction: g.period_fraction,
            valley_fraction: g.valley_fraction,
            chain_probability: 0.0,
            chain_delay: 1,
        }
    }
}

impl WorkloadConfig {
    pub fn gen_params(&self, sim: &SimConfig) -> GenParams {
        GenParams {
            capacity: sim.capacity,
            num_dims: sim.num_dims,
            short_length: self.short_length,
            long_length: self.long_length,
            long_fraction: self.long_fraction,
            dominant_peak: self.dominant_peak,
            other_peak: self.other_peak,
            period_fraction: self.period_fraction,
            valley_fraction: self.valley_fraction,
        }
    }

    pub fn chain(&self) -> Option<ChainRule> {
        (self.chain_probability > 0.0)
            .then_some(ChainRule { probability: self.chain_probability, delay: self.chain_delay })
    }

    pub fn validate(&self, sim: &SimConfig) -> Result<()> {
        self.gen_params(sim).validate()?;
        if !(0.0..=1.0).contains(&self.chain_probability) {
            return Err(Error::Config("workload.chain_probability must be in [0, 1]".into()));
        }
        if self.chain_delay == 0 {
            return Err(Error::Config("workload.chain_delay must be >= 1".into()));
        }
        Ok(())
    }
}

/// Evaluation protocol used by `compare` and when `evaluate` generates its
/// own workloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub loads: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Arrival window of evaluation workloads; episodes then run to
    /// `sim.episode_horizon` or until every job finishes.
    pub arrival_horizon: u32,
    /// Report utilization without clamping demand at capacity.
    pub unclamped_util: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            loads: vec![0.3, 0.5, 0.8],
            seeds: vec![101, 102, 103, 104, 105],
            arrival_horizon: 100,
            unclamped_util: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loads.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("eval.loads and eval.seeds must be non-empty".into()));
        }
        if let Some(l) = self.loads.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(Error::Config(format!("eval.loads: {l} is outside (0, 1)")));
        }
        if self.arrival_horizon == 0 {
            return Err(Error::Config("eval.arrival_horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workload: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub policy: PolicyKind,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { policy: PolicyKind::DeepPlace }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub sim: SimConfig,
    pub workload: WorkloadConfig,
    pub reward: RewardWeights,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub heuristic: HeuristicConfig,
    pub color: ColorScheme,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.workload.validate(&self.sim)?;
        self.reward.validate()?;
        self.policy.validate()?;
        self.train.validate()?;
        self.heuristic.validate()?;
        self.color.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn gen_params(&self) -> GenParams {
        self.workload.gen_params(&self.sim)
    }

    pub fn encoder(&self) -> Result<Encoder> {
        Encoder::new(&self.sim, self.color.clone())
    }

    pub fn rollout_context(&self) -> Result<RolloutContext> {
        Ok(RolloutContext { sim: self.sim.clone(), weights: self.reward.clone(), encoder: self.encoder()? })
    }

    /// Annotated reference listing every key at its default value.
    pub fn defaults_reference() -> String {
        let mut out = String::from(
            "# Default configuration. Every key is optional; unknown keys are rejected.\n\
             # run.policy: deepplace | tetris | bestfit | random\n\
             # sim.max_decisions_per_step: 0 means queue_slots\n\
             # workload.chain_probability: 0 disables follow-up jobs\n\
             # train.attribution: shared | final_only\n\
             # heuristic.tetris_availability: peak_reserved | instantaneous\n\
             # paths.workload, paths.checkpoint, paths.out_dir: optional paths\n\n",
        );
        out.push_str(&RunConfig::default().to_toml());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let mut cfg = RunConfig::default();
        cfg.sim.num_machines = 4;
        cfg.reward.w_under = 0.5;
        cfg.paths.checkpoint = Some("model.ckpt".into());
        cfg.run.policy = PolicyKind::Tetris;
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn defaults_reference_parses() {
        let cfg = RunConfig::from_toml(&RunConfig::defaults_reference()).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn rejects_unknown_and_invalid_keys() {
        assert!(RunConfig::from_toml("[sim]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[nope]\n").is_err());
        assert!(RunConfig::from_toml("[sim]\nnum_machines = 0\n").is_err());
        assert!(RunConfig::from_toml("[reward]\ngamma = 1.5\n").is_err());
        assert!(RunConfig::from_toml("[run]\npolicy = \"sjf\"\n").is_err());
        assert!(RunConfig::from_toml("[eval]\nloads = [1.5]\n").is_err());
    }

    #[test]
    fn policy_names() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
