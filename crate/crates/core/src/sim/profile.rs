//! Job profiles with square-wave temporal demand, and the random generator
//! that produces the job catalogs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Square-wave demand in one resource dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimProfile {
    pub peak: u32,
    pub valley: u32,
    pub period: u32,
    pub width: u32,
    /// Offset of the first peak, in timesteps.
    pub phase: u32,
}

impl DimProfile {
    /// A flat demand of `units` in every timestep.
    pub fn constant(units: u32) -> Self {
        DimProfile { peak: units, valley: units, period: 1, width: 1, phase: 0 }
    }

    #[inline]
    fn at(&self, t_local: u32) -> u32 {
        if (t_local + self.phase) % self.period < self.width {
            self.peak
        } else {
            self.valley
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobProfile {
    pub job_id: u64,
    pub type_id: u32,
    /// Length in timesteps.
    pub length: u32,
    pub dims: Vec<DimProfile>,
    pub dominant_dim: usize,
}

impl JobProfile {
    pub fn num_dims(&self) -> usize {
        self.dims.len()
    }

    /// Demand in dimension `d` at local time `t_local` (0 at the first
    /// running timestep).
    pub fn usage_at(&self, t_local: u32, d: usize) -> Result<u32> {
        if t_local >= self.length {
            return Err(Error::Domain(format!(
                "local time {t_local} outside job of length {}",
                self.length
            )));
        }
        let dim = self
            .dims
            .get(d)
            .ok_or_else(|| Error::Domain(format!("dimension {d} out of range")))?;
        Ok(dim.at(t_local))
    }

    /// Unchecked variant for the simulator hot path; callers guarantee
    /// `t_local < length` and `d < num_dims()`.
    #[inline]
    pub(crate) fn demand(&self, t_local: u32, d: usize) -> u32 {
        debug_assert!(t_local < self.length);
        self.dims[d].at(t_local)
    }

    pub fn peak(&self, d: usize) -> u32 {
        self.dims[d].peak
    }

    /// Σ_t Σ_d demand over the whole job.
    pub fn integral_demand(&self) -> u64 {
        (0..self.length)
            .map(|t| self.dims.iter().map(|p| p.at(t) as u64).sum::<u64>())
            .sum()
    }

    pub fn validate(&self, capacity: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(format!("job {}: {msg}", self.job_id)));
        if self.length == 0 {
            return bad("zero length".into());
        }
        if self.dims.is_empty() {
            return bad("no resource dimensions".into());
        }
        if self.dominant_dim >= self.dims.len() {
            return bad(format!("dominant dimension {} out of range", self.dominant_dim));
        }
        for (d, p) in self.dims.iter().enumerate() {
            if p.valley == 0 || p.valley > p.peak || p.peak > capacity {
                return bad(format!(
                    "dim {d}: need 0 < valley ({}) <= peak ({}) <= capacity ({capacity})",
                    p.valley, p.peak
                ));
            }
            if p.width == 0 || p.width > p.period || p.period > self.length {
                return bad(format!(
                    "dim {d}: need 0 < width ({}) <= period ({}) <= length ({})",
                    p.width, p.period, self.length
                ));
            }
            if p.phase >= p.period {
                return bad(format!("dim {d}: phase {} >= period {}", p.phase, p.period));
            }
        }
        Ok(())
    }
}

pub fn round_half_up(x: f64) -> u32 {
    (x + 0.5).floor().max(0.0) as u32
}

/// Converts a capacity fraction into whole units, at least 1 and at most
/// `capacity`.
pub fn fraction_to_units(fraction: f64, capacity: u32) -> u32 {
    round_half_up(fraction * capacity as f64).clamp(1, capacity.max(1))
}

/// Period and width of a square wave for a job of `length` timesteps, where
/// `fraction` is the period as a fraction of the length.
pub fn square_wave_shape(length: u32, fraction: f64) -> (u32, u32) {
    let period = round_half_up(fraction * length as f64).clamp(1, length.max(1));
    let width = round_half_up(period as f64 / 4.0).clamp(1, period);
    (period, width)
}

/// Parameters of the random job generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub capacity: u32,
    pub num_dims: usize,
    pub short_length: (u32, u32),
    pub long_length: (u32, u32),
    pub long_fraction: f64,
    pub dominant_peak: (f64, f64),
    pub other_peak: (f64, f64),
    pub period_fraction: (f64, f64),
    pub valley_fraction: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            capacity: 10,
            num_dims: 2,
            short_length: (3, 6),
            long_length: (12, 20),
            long_fraction: 0.5,
            dominant_peak: (0.3, 0.5),
            other_peak: (0.08, 0.16),
            period_fraction: (0.2, 0.5),
            valley_fraction: 0.2,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("generator: {m}")));
        if self.capacity == 0 || self.num_dims == 0 {
            return err("capacity and num_dims must be positive");
        }
        for (lo, hi) in [self.short_length, self.long_length] {
            if lo == 0 || lo > hi {
                return err("length ranges must satisfy 1 <= lo <= hi");
            }
        }
        for (lo, hi) in [self.dominant_peak, self.other_peak, self.period_fraction] {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return err("fraction ranges must satisfy 0 < lo <= hi <= 1");
            }
        }
        if !(0.0..=1.0).contains(&self.long_fraction) {
            return err("long_fraction must be in [0, 1]");
        }
        if !(self.valley_fraction > 0.0 && self.valley_fraction <= 1.0) {
            return err("valley_fraction must be in (0, 1]");
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws one job profile. `type_id` and `job_id` are assigned by the caller.
pub fn sample_job_profile<R: Rng + ?Sized>(
    params: &GenParams,
    type_id: u32,
    rng: &mut R,
) -> JobProfile {
    let dominant_dim = rng.random_range(0..params.num_dims);
    let (lo, hi) = if rng.random_bool(params.long_fraction) {
        params.long_length
    } else {
        params.short_length
    };
    let length = rng.random_range(lo..=hi);
    let dims = (0..params.num_dims)
        .map(|d| {
            let range = if d == dominant_dim { params.dominant_peak } else { params.other_peak };
            let peak = fraction_to_units(uniform(rng, range), params.capacity);
            let valley = round_half_up(params.valley_fraction * peak as f64).clamp(1, peak);
            let (period, width) = square_wave_shape(length, uniform(rng, params.period_fraction));
            let phase = rng.random_range(0..period);
            DimProfile { peak, valley, period, width, phase }
        })
        .collect();
    JobProfile { job_id: type_id as u64, type_id, length, dims, dominant_dim }
}

pub const TRAIN_CATALOG_SIZE: usize = 50;
pub const TEST_CATALOG_SIZE: usize = 18;
const TRAIN_CATALOG_SEED: u64 = 0x7472_6169_6e00_0001;
const TEST_CATALOG_SEED: u64 = 0x7465_7374_0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogKind {
    Train,
    Test,
}

impl std::str::FromStr for CatalogKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(CatalogKind::Train),
            "test" => Ok(CatalogKind::Test),
            other => Err(Error::Config(format!("unknown catalog {other:?}"))),
        }
    }
}

/// A fixed set of job profiles that workload arrivals draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub profiles: Vec<JobProfile>,
}

impl Catalog {
    /// Generates `size` profiles with type ids `first_type..first_type+size`.
    pub fn generate(params: &GenParams, size: usize, first_type: u32, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let profiles = (0..size as u32)
            .map(|i| sample_job_profile(params, first_type + i, &mut rng))
            .collect();
        Catalog { profiles }
    }

    /// The standard training (50 types, ids 0..50) and test (18 types, ids
    /// 50..68) catalogs. Type ids never overlap so one color scheme covers
    /// both.
    pub fn standard(kind: CatalogKind, params: &GenParams) -> Self {
        match kind {
            CatalogKind::Train => Self::generate(params, TRAIN_CATALOG_SIZE, 0, TRAIN_CATALOG_SEED),
            CatalogKind::Test => Self::generate(
                params,
                TEST_CATALOG_SIZE,
                TRAIN_CATALOG_SIZE as u32,
                TEST_CATALOG_SEED,
            ),
        }
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Mean of Σ_t Σ_d demand over the catalog.
    pub fn mean_integral_demand(&self) -> f64 {
        if self.profiles.is_empty() {
            return 0.0;
        }
        let total: u64 = self.profiles.iter().map(JobProfile::integral_demand).sum();
        total as f64 / self.profiles.len() as f64
    }
}

/// Total number of job types across the standard catalogs.
pub const STANDARD_NUM_TYPES: usize = TRAIN_CATALOG_SIZE + TEST_CATALOG_SIZE;

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(peak: u32, valley: u32, period: u32, width: u32, phase: u32) -> JobProfile {
        JobProfile {
            job_id: 0,
            type_id: 0,
            length: 16,
            dims: vec![DimProfile { peak, valley, period, width, phase }],
            dominant_dim: 0,
        }
    }

    #[test]
    fn usage_at_square_wave() {
        let p = wave(5, 1, 8, 2, 0);
        assert_eq!(p.usage_at(0, 0).unwrap(), 5);
        assert_eq!(p.usage_at(2, 0).unwrap(), 1);
        // (1 + 3) mod 4 = 0 < 1
        let q = wave(4, 1, 4, 1, 3);
        assert_eq!(q.usage_at(1, 0).unwrap(), 4);
    }

    #[test]
    fn usage_at_rejects_out_of_range() {
        let p = wave(5, 1, 8, 2, 0);
        assert!(matches!(p.usage_at(16, 0), Err(Error::Domain(_))));
        assert!(matches!(p.usage_at(0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn unit_conversion() {
        assert_eq!(fraction_to_units(0.4, 10), 4);
        assert_eq!(fraction_to_units(0.08, 10), 1);
        assert_eq!(fraction_to_units(0.16, 10), 2);
        assert_eq!(fraction_to_units(0.001, 10), 1);
        assert_eq!(square_wave_shape(20, 0.25), (5, 1));
        assert_eq!(square_wave_shape(3, 0.2), (1, 1));
        assert_eq!(square_wave_shape(20, 0.5), (10, 3));
    }

    #[test]
    fn validate_catches_bad_profiles() {
        assert!(wave(5, 1, 8, 2, 0).validate(10).is_ok());
        assert!(wave(5, 1, 8, 2, 0).validate(4).is_err());
        assert!(wave(5, 6, 8, 2, 0).validate(10).is_err());
        assert!(wave(5, 1, 8, 9, 0).validate(10).is_err());
        assert!(wave(5, 1, 17, 2, 0).validate(10).is_err());
        assert!(wave(5, 1, 8, 2, 8).validate(10).is_err());
    }

    #[test]
    fn sampled_profiles_respect_ranges() {
        let params = GenParams::default();
        let mut rng = rng::seeded(3);
        let mut long = 0;
        let n = 4000;
        for i in 0..n {
            let p = sample_job_profile(&params, i, &mut rng);
            p.validate(params.capacity).unwrap();
            if p.length >= 12 {
                long += 1;
                assert!(p.length <= 20);
            } else {
                assert!((3..=6).contains(&p.length));
            }
            for (d, dim) in p.dims.iter().enumerate() {
                if d == p.dominant_dim {
                    assert!((3..=5).contains(&dim.peak), "{dim:?}");
                } else {
                    assert!((1..=2).contains(&dim.peak), "{dim:?}");
                }
                assert_eq!(dim.valley, round_half_up(0.2 * dim.peak as f64).max(1));
                assert!(dim.period as f64 >= (0.2 * p.length as f64 - 0.5).floor().max(1.0));
                assert_eq!(dim.width, round_half_up(dim.period as f64 / 4.0).max(1));
            }
        }
        let frac = long as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.03, "long fraction {frac}");
    }

    #[test]
    fn standard_catalogs() {
        let params = GenParams::default();
        let train = Catalog::standard(CatalogKind::Train, &params);
        let test = Catalog::standard(CatalogKind::Test, &params);
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 18);
        let mut types: Vec<u32> = train.profiles.iter().chain(&test.profiles).map(|p| p.type_id).collect();
        types.dedup();
        assert_eq!(types, (0..68).collect::<Vec<_>>());
        assert_eq!(train, Catalog::standard(CatalogKind::Train, &params));
    }
}
