//! Resumable run state: per-agent `x` and `φ` as little-endian `f64`.
//!
//! Layout: 8-byte magic `CADENCK1`, then `m`, `d`, `round` as little-endian
//! `u64`, then for each agent `d` values of `x` followed by `d` values of `φ`.

use std::io::{Read, Write};

use crate::engine::AgentState;
use crate::error::{CadenError, Result};
use crate::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CADENCK1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub m: usize,
    pub d: usize,
    pub round: usize,
    pub x: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_states<S: Scalar>(states: &[AgentState<S>], round: usize) -> Self {
        let to64 = |v: &Vec<S>| v.iter().map(|e| e.as_f64()).collect::<Vec<f64>>();
        Checkpoint {
            m: states.len(),
            d: states.first().map_or(0, |s| s.x.len()),
            round,
            x: states.iter().map(|s| to64(&s.x)).collect(),
            phi: states.iter().map(|s| to64(&s.phi)).collect(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        for v in [self.m, self.d, self.round] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for (x, phi) in self.x.iter().zip(&self.phi) {
            for v in x.iter().chain(phi) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CadenError::Format("not a checkpoint file".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let m = next_u64(&mut r)? as usize;
        let d = next_u64(&mut r)? as usize;
        let round = next_u64(&mut r)? as usize;
        let read_block = |r: &mut R| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; d * 8];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let mut x = Vec::with_capacity(m);
        let mut phi = Vec::with_capacity(m);
        for _ in 0..m {
            x.push(read_block(&mut r)?);
            phi.push(read_block(&mut r)?);
        }
        Ok(Checkpoint { m, d, round, x, phi })
    }
}
