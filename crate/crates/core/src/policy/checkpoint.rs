//! Binary checkpoint format.
//!
//! ```text
//! "DPLC" | version u16 | input_dim u32 | hidden u32 | actions u32
//!        | W1 | b1 | W2 | b2                       (f64 each)
//!        | flag u8 | [m | v | step_count u64]      (present iff flag == 1)
//! ```
//!
//! All integers and reals are little-endian; matrices are row-major.

use super::adam::{AdamState, LEARNING_RATE};
use super::net::{NetShape, PolicyParams};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DPLC";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.params.shape();
        let n = shape.num_params();
        let mut out = Vec::with_capacity(19 + 8 * n * 3 + 9);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for dim in [shape.input_dim, shape.hidden, shape.actions] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        put_reals(&mut out, self.params.as_slice());
        match &self.adam {
            None => out.push(0),
            Some(adam) => {
                out.push(1);
                put_reals(&mut out, &adam.m);
                put_reals(&mut out, &adam.v);
                out.extend_from_slice(&adam.step_count.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut dim = || -> Result<usize> { Ok(u32::from_le_bytes(r.array()?) as usize) };
        let shape = NetShape { input_dim: dim()?, hidden: dim()?, actions: dim()? };
        if shape.input_dim == 0 || shape.hidden == 0 || shape.actions == 0 {
            return Err(Error::Checkpoint("zero network dimension".into()));
        }
        let n = shape
            .hidden
            .checked_mul(shape.input_dim)
            .and_then(|w1| w1.checked_add(shape.hidden))
            .and_then(|s| s.checked_add(shape.actions.checked_mul(shape.hidden)?))
            .and_then(|s| s.checked_add(shape.actions))
            .ok_or_else(|| Error::Checkpoint("network dimensions overflow".into()))?;
        let params = PolicyParams::from_flat(shape, r.reals(n)?)?;
        let adam = match r.take(1)?[0] {
            0 => None,
            1 => {
                let m = r.reals(n)?;
                let v = r.reals(n)?;
                let step_count = u64::from_le_bytes(r.array()?);
                if v.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::Checkpoint("negative second moment".into()));
                }
                Some(AdamState { m, v, step_count, lr: LEARNING_RATE })
            }
            flag => return Err(Error::Checkpoint(format!("bad optimizer flag {flag}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Checkpoint { params, adam })
    }
}

fn put_reals(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice of length N"))
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Checkpoint("length overflow".into()))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}
