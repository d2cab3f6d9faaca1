use serde::{Deserialize, Serialize};

use super::{compute_target_bits, map_qp, EncoderOracle, FirstPassRecord, FrameDecision, RcConfig, RcState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcSummary {
    pub target_bitrate: f64,
    pub fps: f64,
    pub total_bits: f64,
    /// `(total_bits - n * b_base) / (n * b_base)`, as a fraction.
    pub bitrate_deviation: f64,
    pub mean_qp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondPassRun {
    pub decisions: Vec<FrameDecision>,
    pub summary: RcSummary,
}

impl SecondPassRun {
    /// Population standard deviation of the final QPs.
    pub fn qp_stddev(&self) -> f64 {
        let n = self.decisions.len() as f64;
        let mean = self.summary.mean_qp;
        let var = self.decisions.iter().map(|d| (d.q_prime_p as f64 - mean).powi(2)).sum::<f64>() / n;
        var.sqrt()
    }

    pub fn achieved_bitrate(&self) -> f64 {
        self.summary.total_bits * self.summary.fps / self.decisions.len() as f64
    }
}

/// Runs the second pass strictly in frame order.
///
/// An encoder failure aborts the run; the error carries the decisions made so far.
pub fn run_second_pass<E: EncoderOracle + ?Sized>(
    records: &[FirstPassRecord],
    encoder: &mut E,
    cfg: &RcConfig,
) -> Result<SecondPassRun> {
    if records.is_empty() {
        return Err(Error::NoFrames);
    }
    cfg.validate()?;
    for r in records {
        r.validate()?;
    }

    let mut state = RcState::new(cfg);
    let mut decisions: Vec<FrameDecision> = Vec::with_capacity(records.len());
    for record in records {
        let b_prime = compute_target_bits(&state, cfg);
        let (q_bar, q_prime) = map_qp(record, b_prime, cfg);
        let mut decision = FrameDecision {
            frame_index: record.frame_index,
            q_p: record.q_p,
            b_hat_p: record.b_hat_p,
            b_prime_p: b_prime,
            q_bar_p: q_bar,
            q_prime_p: q_prime,
            actual_bits: None,
            deficit: None,
        };
        let actual = match encoder.encode(&decision) {
            Ok(bits) if bits.is_finite() && bits >= 0.0 => bits,
            Ok(bits) => {
                return Err(Error::Encoder {
                    frame_index: record.frame_index,
                    message: format!("encoder reported invalid size {bits}"),
                    partial_trace: decisions,
                })
            }
            Err(e) => {
                return Err(Error::Encoder {
                    frame_index: record.frame_index,
                    message: e.to_string(),
                    partial_trace: decisions,
                })
            }
        };
        state.record(actual);
        decision.actual_bits = Some(actual);
        decision.deficit = Some(state.deficit);
        decisions.push(decision);
    }

    let n = decisions.len() as f64;
    let total_bits: f64 = decisions.iter().filter_map(|d| d.actual_bits).sum();
    let budget = n * state.base_budget;
    let summary = RcSummary {
        target_bitrate: cfg.target_bitrate,
        fps: cfg.fps(),
        total_bits,
        bitrate_deviation: (total_bits - budget) / budget,
        mean_qp: decisions.iter().map(|d| d.q_prime_p as f64).sum::<f64>() / n,
    };
    Ok(SecondPassRun { decisions, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::VideoGeometry;

    fn cfg(lambda: f64) -> RcConfig {
        RcConfig {
            deficit_gain: lambda,
            ..RcConfig::new(300_000.0, VideoGeometry::yuv420_8bit(1920, 1080, 30, 1).unwrap())
        }
    }

    fn records(n: usize, b_hat: f64) -> Vec<FirstPassRecord> {
        (0..n).map(|frame_index| FirstPassRecord { frame_index, q_p: 32, b_hat_p: b_hat }).collect()
    }

    #[test]
    fn perfect_encoder_keeps_zero_deficit() {
        let c = cfg(0.5);
        let mut enc = |d: &FrameDecision| Ok(d.b_prime_p);
        let run = run_second_pass(&records(50, 7000.0), &mut enc, &c).unwrap();
        assert!(run.decisions.iter().all(|d| d.deficit == Some(0.0)));
        assert_eq!(run.summary.bitrate_deviation, 0.0);
    }

    #[test]
    fn single_frame_identity() {
        let c = cfg(0.5);
        let mut enc = |d: &FrameDecision| Ok(d.b_prime_p);
        let run = run_second_pass(&records(1, c.base_budget()), &mut enc, &c).unwrap();
        assert_eq!(run.decisions[0].q_prime_p, 32);
        assert_eq!(run.decisions[0].q_bar_p, 32.0);
    }

    #[test]
    fn deficit_invariant_holds_each_frame() {
        let c = cfg(0.5);
        let mut k = 0u32;
        let mut enc = |d: &FrameDecision| {
            k += 1;
            Ok(d.b_prime_p * (0.7 + 0.1 * (k % 7) as f64))
        };
        let run = run_second_pass(&records(120, 9000.0), &mut enc, &c).unwrap();
        let mut expected = 0.0;
        for d in &run.decisions {
            expected += d.actual_bits.unwrap() - c.base_budget();
            assert!((d.deficit.unwrap() - expected).abs() <= 1e-9 * c.base_budget() * 120.0);
        }
    }

    #[test]
    fn encoder_failure_keeps_partial_trace() {
        let c = cfg(0.5);
        let mut enc = |d: &FrameDecision| {
            if d.frame_index == 3 {
                Err(Error::InvalidInput("boom".into()))
            } else {
                Ok(1000.0)
            }
        };
        match run_second_pass(&records(10, 1000.0), &mut enc, &c) {
            Err(Error::Encoder { frame_index, partial_trace, message }) => {
                assert_eq!(frame_index, 3);
                assert_eq!(partial_trace.len(), 3);
                assert!(message.contains("boom"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_records_rejected() {
        let mut enc = |_: &FrameDecision| Ok(1.0);
        assert!(matches!(run_second_pass(&[], &mut enc, &cfg(0.5)), Err(Error::NoFrames)));
    }
}
