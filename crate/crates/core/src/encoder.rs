//! Colored-image encoding of the cluster state.
//!
//! Each machine contributes one `k x C` grid per resource dimension (row =
//! timestep, oldest first; column = resource unit) followed by `S` slots for
//! jobs committed in the current round. A cell occupied by an instance holds
//! `m + color`, where `m` is the 1-based machine index and `color` in (0, 1)
//! identifies the job type with a small per-instance offset. Free cells are
//! 0. The vector ends with `Q` queue slots (raw colors, no machine offset)
//! and one normalized backlog scalar.

use serde::{Deserialize, Serialize};

use crate::sim::{ClusterState, SimConfig, STANDARD_NUM_TYPES};
use crate::{Error, Result};

/// Backlog count at which the backlog scalar saturates at 1.
pub const BACKLOG_SATURATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColorScheme {
    pub num_types: usize,
    pub instance_epsilon: f64,
    pub max_instances_per_type: usize,
}

impl Default for ColorScheme {
    fn default() -> Self {
        ColorScheme {
            num_types: STANDARD_NUM_TYPES,
            instance_epsilon: 0.001,
            max_instances_per_type: 4,
        }
    }
}

impl ColorScheme {
    pub fn validate(&self) -> Result<()> {
        if self.num_types == 0 || self.max_instances_per_type == 0 {
            return Err(Error::Config("color: num_types and max_instances_per_type must be >= 1".into()));
        }
        if !(self.instance_epsilon > 0.0 && self.instance_epsilon.is_finite()) {
            return Err(Error::Config("color: instance_epsilon must be positive".into()));
        }
        // colors of type g must stay below the base of type g + 1 (and below 1)
        let spacing = 1.0 / (self.num_types as f64 + 2.0);
        if self.max_instances_per_type as f64 * self.instance_epsilon >= spacing {
            return Err(Error::Config(format!(
                "color: {} instances x epsilon {} collide with type spacing {spacing}",
                self.max_instances_per_type, self.instance_epsilon
            )));
        }
        Ok(())
    }

    pub fn base(&self, type_id: usize) -> f64 {
        (type_id as f64 + 1.0) / (self.num_types as f64 + 2.0)
    }

    pub fn assign_color(&self, type_id: usize, ordinal: usize) -> Result<f64> {
        if type_id >= self.num_types {
            return Err(Error::Domain(format!(
                "type {type_id} outside color scheme of {} types",
                self.num_types
            )));
        }
        if ordinal >= self.max_instances_per_type {
            return Err(Error::Domain(format!(
                "instance ordinal {ordinal} >= {}",
                self.max_instances_per_type
            )));
        }
        Ok(self.base(type_id) + ordinal as f64 * self.instance_epsilon)
    }

    /// Color of a concrete instance; the ordinal wraps modulo
    /// `max_instances_per_type`.
    pub fn instance_color(&self, type_id: u32, instance_id: u64) -> Result<f64> {
        let ordinal = (instance_id % self.max_instances_per_type as u64) as usize;
        self.assign_color(type_id as usize, ordinal)
    }
}

pub fn machine_color(color: f64, machine: usize) -> f64 {
    machine as f64 + color
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateImage {
    pub values: Vec<f64>,
    /// Some row demanded more than `C` units; the affected rows are painted
    /// full width.
    pub over_demand: bool,
}

/// Fixed layout of the image for one [`SimConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub scheme: ColorScheme,
    machines: usize,
    capacity: usize,
    dims: usize,
    depth: usize,
    sched_slots: usize,
    queue_slots: usize,
}

impl Encoder {
    pub fn new(cfg: &SimConfig, scheme: ColorScheme) -> Result<Self> {
        cfg.validate()?;
        scheme.validate()?;
        Ok(Encoder {
            scheme,
            machines: cfg.num_machines,
            capacity: cfg.capacity as usize,
            dims: cfg.num_dims,
            depth: cfg.history_depth,
            sched_slots: cfg.sched_slots,
            queue_slots: cfg.queue_slots,
        })
    }

    pub fn grid_len(&self) -> usize {
        self.depth * self.capacity
    }

    pub fn machine_block_len(&self) -> usize {
        self.dims * self.grid_len() + self.sched_slots
    }

    /// `N * (k * C * D + S) + Q + 1`.
    pub fn input_dim(&self) -> usize {
        self.machines * self.machine_block_len() + self.queue_slots + 1
    }

    /// Offset of cell (`row`, `col`) of dimension `d` for 0-based machine
    /// `m`.
    pub fn cell_offset(&self, m: usize, d: usize, row: usize, col: usize) -> usize {
        m * self.machine_block_len() + d * self.grid_len() + row * self.capacity + col
    }

    pub fn sched_offset(&self, m: usize, slot: usize) -> usize {
        m * self.machine_block_len() + self.dims * self.grid_len() + slot
    }

    pub fn queue_offset(&self, slot: usize) -> usize {
        self.machines * self.machine_block_len() + slot
    }

    pub fn backlog_offset(&self) -> usize {
        self.input_dim() - 1
    }

    pub fn encode(&self, state: &ClusterState) -> Result<StateImage> {
        let mut values = vec![0.0; self.input_dim()];
        let over_demand = self.encode_into(state, &mut values)?;
        Ok(StateImage { values, over_demand })
    }

    /// Writes the image into `out` (resized and cleared) and returns the
    /// over-demand flag.
    pub fn encode_into(&self, state: &ClusterState, out: &mut Vec<f64>) -> Result<bool> {
        if state.machines.len() != self.machines {
            return Err(Error::Shape(format!(
                "state has {} machines, encoder expects {}",
                state.machines.len(),
                self.machines
            )));
        }
        out.clear();
        out.resize(self.input_dim(), 0.0);
        let mut over = false;
        for (m, machine) in state.machines.iter().enumerate() {
            let idx = machine.index;
            // newest row lands in the last grid row
            let skip = self.depth - machine.history.len().min(self.depth);
            for (r, row) in machine.history.iter().rev().take(self.depth).rev().enumerate() {
                let grid_row = skip + r;
                for d in 0..self.dims {
                    let mut col = 0;
                    for occ in &row.occupants {
                        let units = occ.units[d] as usize;
                        if units == 0 {
                            continue;
                        }
                        let value =
                            machine_color(self.scheme.instance_color(occ.type_id, occ.instance_id)?, idx);
                        let end = (col + units).min(self.capacity);
                        if col + units > self.capacity {
                            over = true;
                        }
                        let base = self.cell_offset(m, d, grid_row, 0);
                        out[base + col..base + end].fill(value);
                        col = end;
                        if col == self.capacity {
                            break;
                        }
                    }
                }
            }
            for (slot, job) in machine.committed.iter().take(self.sched_slots).enumerate() {
                let color = self.scheme.instance_color(job.type_id(), job.instance_id)?;
                out[self.sched_offset(m, slot)] = machine_color(color, idx);
            }
        }
        for (slot, job) in state.queue.iter().take(self.queue_slots).enumerate() {
            out[self.queue_offset(slot)] = self.scheme.instance_color(job.type_id(), job.instance_id)?;
        }
        let backlog = state.backlog_count().min(BACKLOG_SATURATION);
        out[self.backlog_offset()] = backlog as f64 / BACKLOG_SATURATION as f64;
        Ok(over)
    }

    /// Renders the image as CSV: one line per (machine, dimension, row) with
    /// `C` cells, then one line per machine of scheduled slots, then the
    /// queue slots and backlog scalar.
    pub fn to_csv_grid(&self, image: &StateImage) -> String {
        let v = &image.values;
        let mut out = String::new();
        let join = |cells: &[f64]| cells.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",");
        for m in 0..self.machines {
            for d in 0..self.dims {
                for row in 0..self.depth {
                    let start = self.cell_offset(m, d, row, 0);
                    out.push_str(&format!("m{},d{d},r{row},", m + 1));
                    out.push_str(&join(&v[start..start + self.capacity]));
                    out.push('\n');
                }
            }
            let start = self.sched_offset(m, 0);
            out.push_str(&format!("m{},sched,,", m + 1));
            out.push_str(&join(&v[start..start + self.sched_slots]));
            out.push('\n');
        }
        let start = self.queue_offset(0);
        out.push_str("queue,,,");
        out.push_str(&join(&v[start..start + self.queue_slots]));
        out.push('\n');
        out.push_str(&format!("backlog,,,{}\n", v[self.backlog_offset()]));
        out
    }
}
