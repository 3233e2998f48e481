//! Evaluation protocol: run policies over test workloads and aggregate the
//! metric families.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::baselines::{BestFit, RandomPlacement, Tetris};
use crate::config::{PolicyKind, RunConfig};
use crate::episode::{run_episode, NetworkPolicy, PlacementPolicy};
use crate::metrics::{EpisodeMetrics, EpisodeTrace};
use crate::policy::PolicyParams;
use crate::sim::{Catalog, CatalogKind, WorkloadGenerator, WorkloadTrace};
use crate::{Error, Result};

/// Builds policy `kind`; `seed` only affects Random.
pub fn make_policy(
    cfg: &RunConfig,
    kind: PolicyKind,
    params: Option<&PolicyParams>,
    seed: u64,
) -> Result<Box<dyn PlacementPolicy>> {
    Ok(match kind {
        PolicyKind::DeepPlace => {
            let params = params
                .ok_or_else(|| Error::Config("deepplace requires a checkpoint".into()))?
                .clone();
            Box::new(NetworkPolicy::greedy(params, cfg.encoder()?)?)
        }
        PolicyKind::Tetris => Box::new(Tetris { cfg: cfg.heuristic.clone() }),
        PolicyKind::BestFit => Box::new(BestFit),
        PolicyKind::Random => Box::new(RandomPlacement::new(seed)),
    })
}

/// Test-catalog workload for one (load, seed) cell of the suite.
pub fn test_workload(cfg: &RunConfig, catalog: &Catalog, load: f64, seed: u64) -> Result<WorkloadTrace> {
    let sim = &cfg.sim;
    let mut gen = WorkloadGenerator::new(catalog, sim.num_machines, sim.capacity, sim.num_dims);
    if let Some(chain) = cfg.workload.chain() {
        gen = gen.with_chain(chain);
    }
    gen.generate(load, cfg.eval.arrival_horizon, seed)
}

pub fn test_catalog(cfg: &RunConfig) -> Catalog {
    Catalog::standard(CatalogKind::Test, &cfg.gen_params())
}

pub fn evaluate(
    cfg: &RunConfig,
    kind: PolicyKind,
    params: Option<&PolicyParams>,
    trace: &WorkloadTrace,
    seed: u64,
) -> Result<EpisodeTrace> {
    let mut policy = make_policy(cfg, kind, params, seed)?;
    run_episode(&cfg.sim, &cfg.reward, trace, &mut *policy)
}

/// Key of one aggregated value: (policy, load as text, metric, dimension).
pub type CellKey = (PolicyKind, String, &'static str, String);

pub fn load_label(load: f64) -> String {
    format!("{load}")
}

/// Per-seed metric rows and their means over seeds.
#[derive(Debug, Clone, Default)]
pub struct SuiteResults {
    pub runs: Vec<(PolicyKind, f64, u64, EpisodeMetrics)>,
}

impl SuiteResults {
    pub fn push(&mut self, kind: PolicyKind, load: f64, seed: u64, metrics: EpisodeMetrics) {
        self.runs.push((kind, load, seed, metrics));
    }

    /// Mean over seeds per (policy, load, metric, dimension). Fragmentation
    /// averages only runs where it is defined.
    pub fn means(&self) -> BTreeMap<CellKey, f64> {
        let mut acc: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
        for (kind, load, _, m) in &self.runs {
            for (metric, dim, value) in m.rows() {
                let e = acc.entry((*kind, load_label(*load), metric, dim)).or_insert((0.0, 0));
                e.0 += value;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn mean(&self, kind: PolicyKind, load: f64, metric: &str, dim: &str) -> Option<f64> {
        self.means()
            .into_iter()
            .find(|((k, l, m, d), _)| *k == kind && *l == load_label(load) && *m == metric && d == dim)
            .map(|(_, v)| v)
    }

    /// `policy,load,metric,dimension,value,rel_vs_tetris`; the last column is
    /// `(value - tetris) / tetris` when Tetris was evaluated and is nonzero.
    pub fn comparison_csv(&self) -> String {
        let means = self.means();
        let mut out = String::from("policy,load,metric,dimension,value,rel_vs_tetris\n");
        for ((kind, load, metric, dim), value) in &means {
            let tetris = means.get(&(PolicyKind::Tetris, load.clone(), *metric, dim.clone()));
            let rel = match tetris {
                Some(&t) if t != 0.0 => format!("{}", (value - t) / t),
                _ => String::new(),
            };
            writeln!(out, "{kind},{load},{metric},{dim},{value},{rel}").unwrap();
        }
        out
    }

    /// Rows restricted to the given metrics, in wide-per-policy long form.
    pub fn metric_csv(&self, metrics: &[&str]) -> String {
        let mut out = String::from("policy,load,metric,dimension,value\n");
        for ((kind, load, metric, dim), value) in self.means() {
            if metrics.contains(&metric) {
                writeln!(out, "{kind},{load},{metric},{dim},{value}").unwrap();
            }
        }
        out
    }
}

/// Runs every (policy, load, seed) cell on freshly generated test workloads.
pub fn run_suite(
    cfg: &RunConfig,
    policies: &[PolicyKind],
    loads: &[f64],
    seeds: &[u64],
    params: Option<&PolicyParams>,
) -> Result<SuiteResults> {
    let catalog = test_catalog(cfg);
    let mut results = SuiteResults::default();
    for &load in loads {
        for &seed in seeds {
            let trace = test_workload(cfg, &catalog, load, seed)?;
            for &kind in policies {
                let ep = evaluate(cfg, kind, params, &trace, seed)?;
                results.push(kind, load, seed, EpisodeMetrics::compute(&ep, !cfg.eval.unclamped_util));
            }
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_schema_and_relative_column() {
        let cfg = RunConfig::default();
        let res = run_suite(&cfg, &[PolicyKind::Tetris, PolicyKind::BestFit], &[0.3], &[1, 2], None).unwrap();
        let means = res.means();
        let t = means[&(PolicyKind::Tetris, "0.3".into(), "avg_utilization", "0".into())];
        let b = means[&(PolicyKind::BestFit, "0.3".into(), "avg_utilization", "0".into())];
        let csv = res.comparison_csv();
        let row = csv
            .lines()
            .find(|l| l.starts_with("bestfit,0.3,avg_utilization,0,"))
            .unwrap();
        let rel: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((rel - (b - t) / t).abs() < 1e-12);
        // one row per (policy, load, metric, dim)
        let keys: Vec<&str> = csv.lines().skip(1).map(|l| l.rsplitn(3, ',').nth(2).unwrap()).collect();
        let mut dedup = keys.clone();
        dedup.dedup();
        assert_eq!(keys.len(), dedup.len());
    }

    #[test]
    fn deepplace_requires_params() {
        let cfg = RunConfig::default();
        assert!(make_policy(&cfg, PolicyKind::DeepPlace, None, 0).is_err());
    }
}
