//! Poisson workload generation and the line-oriented trace file format.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::profile::{Catalog, DimProfile, JobProfile};
use crate::rng;
use crate::{Error, Result};

const TRACE_MAGIC: &str = "#placelab-trace";
const TRACE_VERSION: &str = "v1";
/// The file format carries exactly two resource dimensions.
const TRACE_DIMS: usize = 2;
const FIELDS_PER_LINE: usize = 5 + 5 * TRACE_DIMS;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceJob {
    pub arrival: u32,
    pub profile: JobProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadTrace {
    /// Sorted by arrival time; `profile.job_id` is unique.
    pub jobs: Vec<TraceJob>,
    pub load_target: f64,
    pub seed: u64,
    pub machines: u32,
    pub capacity: u32,
}

/// Optional dependent arrivals: with probability `probability`, a job spawns
/// a successor (drawn from the catalog) arriving `delay` timesteps after the
/// predecessor would finish if started immediately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRule {
    pub probability: f64,
    pub delay: u32,
}

/// Arrivals per timestep that produce the given offered load:
/// `load * machines * capacity * dims / E[integral demand]`.
pub fn calibrate_arrival_rate(
    load_target: f64,
    catalog: &Catalog,
    machines: usize,
    capacity: u32,
    dims: usize,
) -> Result<f64> {
    if catalog.is_empty() {
        return Err(Error::Config("empty job catalog".into()));
    }
    let mean = catalog.mean_integral_demand();
    if mean <= 0.0 {
        return Err(Error::Config("catalog has zero mean demand".into()));
    }
    Ok(load_target * machines as f64 * capacity as f64 * dims as f64 / mean)
}

/// Offered load of a trace if every job ran to completion: total demand over
/// `machines * capacity * dims * horizon`.
pub fn offered_load(trace: &WorkloadTrace, horizon: u32, dims: usize) -> f64 {
    let demand: u64 = trace.jobs.iter().map(|j| j.profile.integral_demand()).sum();
    let supply = trace.machines as f64 * trace.capacity as f64 * dims as f64 * horizon as f64;
    if supply == 0.0 {
        0.0
    } else {
        demand as f64 / supply
    }
}

#[derive(Debug, Clone)]
pub struct WorkloadGenerator<'a> {
    pub catalog: &'a Catalog,
    pub machines: usize,
    pub capacity: u32,
    pub dims: usize,
    pub chain: Option<ChainRule>,
}

impl<'a> WorkloadGenerator<'a> {
    pub fn new(catalog: &'a Catalog, machines: usize, capacity: u32, dims: usize) -> Self {
        WorkloadGenerator { catalog, machines, capacity, dims, chain: None }
    }

    pub fn with_chain(mut self, chain: ChainRule) -> Self {
        self.chain = Some(chain);
        self
    }

    pub fn arrival_rate(&self, load_target: f64) -> Result<f64> {
        calibrate_arrival_rate(load_target, self.catalog, self.machines, self.capacity, self.dims)
    }

    /// Poisson arrivals over `[0, horizon)` at the load-calibrated rate.
    pub fn generate(&self, load_target: f64, horizon: u32, seed: u64) -> Result<WorkloadTrace> {
        if !(load_target > 0.0 && load_target < 1.0) {
            return Err(Error::Config(format!("load target {load_target} not in (0, 1)")));
        }
        let rate = self.arrival_rate(load_target)?;
        self.generate_at_rate(rate, load_target, horizon, seed)
    }

    pub fn generate_at_rate(
        &self,
        rate: f64,
        load_target: f64,
        horizon: u32,
        seed: u64,
    ) -> Result<WorkloadTrace> {
        if self.catalog.is_empty() {
            return Err(Error::Config("empty job catalog".into()));
        }
        let mut rng = rng::seeded(seed);
        let mut arrivals: Vec<(u32, usize)> = Vec::new();
        if rate > 0.0 && rate.is_finite() {
            let gap = Exp::new(rate).map_err(|e| Error::Config(format!("arrival rate: {e}")))?;
            let mut t = 0.0f64;
            loop {
                t += gap.sample(&mut rng);
                if t >= horizon as f64 {
                    break;
                }
                let pick = rng.random_range(0..self.catalog.len());
                arrivals.push((t.floor() as u32, pick));
            }
        }
        if let Some(chain) = self.chain {
            let mut followers = Vec::new();
            for &(at, pick) in &arrivals {
                if rng.random_bool(chain.probability.clamp(0.0, 1.0)) {
                    let len = self.catalog.profiles[pick].length;
                    let next = rng.random_range(0..self.catalog.len());
                    followers.push((at + len + chain.delay, next));
                }
            }
            arrivals.extend(followers);
            arrivals.sort_by_key(|&(at, _)| at);
        }
        let jobs = arrivals
            .into_iter()
            .enumerate()
            .map(|(id, (arrival, pick))| {
                let mut profile = self.catalog.profiles[pick].clone();
                profile.job_id = id as u64;
                TraceJob { arrival, profile }
            })
            .collect();
        Ok(WorkloadTrace {
            jobs,
            load_target,
            seed,
            machines: self.machines as u32,
            capacity: self.capacity,
        })
    }
}

impl WorkloadTrace {
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(
            out,
            "{TRACE_MAGIC} {TRACE_VERSION} seed={} load={} machines={} cap={}",
            self.seed, self.load_target, self.machines, self.capacity
        )
        .expect("write to String");
        for job in &self.jobs {
            let p = &job.profile;
            if p.dims.len() != TRACE_DIMS {
                return Err(Error::Config(format!(
                    "trace files carry {TRACE_DIMS} dimensions, job {} has {}",
                    p.job_id,
                    p.dims.len()
                )));
            }
            write!(
                out,
                "{} {} {} {} {}",
                p.job_id, p.type_id, job.arrival, p.length, p.dominant_dim
            )
            .expect("write to String");
            for d in &p.dims {
                write!(out, " {} {} {} {} {}", d.peak, d.valley, d.period, d.width, d.phase)
                    .expect("write to String");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::TraceFormat { line: 0, msg: format!("not UTF-8: {e}") })?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l)
            .ok_or_else(|| Error::TraceFormat { line: 1, msg: "empty file".into() })?;
        let (seed, load_target, machines, capacity) = parse_header(header)?;
        let mut jobs: Vec<TraceJob> = Vec::new();
        let mut ids = HashSet::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let err = |msg: String| Error::TraceFormat { line: lineno, msg };
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != FIELDS_PER_LINE {
                return Err(err(format!(
                    "expected {FIELDS_PER_LINE} fields, found {}",
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<u64> {
                fields[i]
                    .parse::<u64>()
                    .map_err(|e| err(format!("field {} ({:?}): {e}", i + 1, fields[i])))
            };
            let small = |i: usize| -> Result<u32> {
                u32::try_from(num(i)?).map_err(|_| err(format!("field {} too large", i + 1)))
            };
            let job_id = num(0)?;
            let type_id = small(1)?;
            let arrival = small(2)?;
            let length = small(3)?;
            let dominant_dim = small(4)? as usize;
            let mut dims = Vec::with_capacity(TRACE_DIMS);
            for d in 0..TRACE_DIMS {
                let base = 5 + 5 * d;
                dims.push(DimProfile {
                    peak: small(base)?,
                    valley: small(base + 1)?,
                    period: small(base + 2)?,
                    width: small(base + 3)?,
                    phase: small(base + 4)?,
                });
            }
            let profile = JobProfile { job_id, type_id, length, dims, dominant_dim };
            profile.validate(capacity).map_err(|e| err(e.to_string()))?;
            if !ids.insert(job_id) {
                return Err(err(format!("duplicate job_id {job_id}")));
            }
            if jobs.last().is_some_and(|prev| prev.arrival > arrival) {
                return Err(err("arrival times must be non-decreasing".into()));
            }
            jobs.push(TraceJob { arrival, profile });
        }
        Ok(WorkloadTrace { jobs, load_target, seed, machines, capacity })
    }

    pub fn num_types_upper_bound(&self) -> u32 {
        self.jobs.iter().map(|j| j.profile.type_id + 1).max().unwrap_or(0)
    }
}

fn parse_header(line: &str) -> Result<(u64, f64, u32, u32)> {
    let err = |msg: String| Error::TraceFormat { line: 1, msg };
    let mut parts = line.split(' ');
    if parts.next() != Some(TRACE_MAGIC) {
        return Err(err(format!("missing {TRACE_MAGIC} header")));
    }
    if parts.next() != Some(TRACE_VERSION) {
        return Err(err(format!("unsupported version, expected {TRACE_VERSION}")));
    }
    let mut field = |key: &str| -> Result<&str> {
        let part = parts.next().ok_or_else(|| err(format!("missing {key}=")))?;
        part.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| err(format!("expected {key}=..., found {part:?}")))
    };
    let seed = field("seed")?.parse::<u64>().map_err(|e| err(format!("seed: {e}")))?;
    let load = field("load")?.parse::<f64>().map_err(|e| err(format!("load: {e}")))?;
    let machines = field("machines")?.parse::<u32>().map_err(|e| err(format!("machines: {e}")))?;
    let cap = field("cap")?.parse::<u32>().map_err(|e| err(format!("cap: {e}")))?;
    if parts.next().is_some() {
        return Err(err("trailing header fields".into()));
    }
    if !load.is_finite() {
        return Err(err("load must be finite".into()));
    }
    Ok((seed, load, machines, cap))
}
