//! Encoder back ends for the second pass.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::FrameDecision;
use crate::analyzer::FrameFeatures;
use crate::error::{Error, Result};
use crate::sim::{sim_bits, SimParams};

/// Encodes one frame at `decision.q_prime_p` and reports the bits spent.
pub trait EncoderOracle {
    fn encode(&mut self, decision: &FrameDecision) -> Result<f64>;
}

impl<F> EncoderOracle for F
where
    F: FnMut(&FrameDecision) -> Result<f64>,
{
    fn encode(&mut self, decision: &FrameDecision) -> Result<f64> {
        self(decision)
    }
}

/// Simulated encoder over a known feature trace.
#[derive(Debug, Clone)]
pub struct SimEncoder {
    features: Vec<FrameFeatures>,
    pixels: usize,
    params: SimParams,
}

impl SimEncoder {
    pub fn new(features: Vec<FrameFeatures>, pixels: usize, params: SimParams) -> Result<Self> {
        params.validate()?;
        Ok(SimEncoder { features, pixels, params })
    }
}

impl EncoderOracle for SimEncoder {
    fn encode(&mut self, decision: &FrameDecision) -> Result<f64> {
        let features = self
            .features
            .get(decision.frame_index)
            .ok_or_else(|| Error::InvalidInput(format!("no features for frame {}", decision.frame_index)))?;
        sim_bits(features, decision.q_prime_p, self.pixels, &self.params)
    }
}

/// One `(frame, q) -> bits` measurement from an external encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub frame_index: usize,
    pub q: i32,
    pub bits: f64,
}

/// Replays a table of measured frame sizes.
#[derive(Debug, Clone)]
pub struct LogEncoder {
    table: HashMap<(usize, i32), f64>,
    frames: usize,
}

impl LogEncoder {
    pub fn new(entries: impl IntoIterator<Item = LogEntry>) -> Result<Self> {
        let mut table = HashMap::new();
        let mut frames = BTreeSet::new();
        for e in entries {
            crate::forest::check_qp(e.q)?;
            if !(e.bits.is_finite() && e.bits >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "encoder log: frame {} q {} has invalid bits {}",
                    e.frame_index, e.q, e.bits
                )));
            }
            if table.insert((e.frame_index, e.q), e.bits).is_some() {
                return Err(Error::InvalidInput(format!(
                    "encoder log: duplicate entry for frame {} q {}",
                    e.frame_index, e.q
                )));
            }
            frames.insert(e.frame_index);
        }
        Ok(LogEncoder { table, frames: frames.len() })
    }

    /// Number of distinct frames in the table.
    pub fn frame_count(&self) -> usize {
        self.frames
    }
}

impl EncoderOracle for LogEncoder {
    fn encode(&mut self, decision: &FrameDecision) -> Result<f64> {
        self.table.get(&(decision.frame_index, decision.q_prime_p)).copied().ok_or_else(|| {
            Error::InvalidInput(format!(
                "encoder log has no entry for frame {} at q {}",
                decision.frame_index, decision.q_prime_p
            ))
        })
    }
}
