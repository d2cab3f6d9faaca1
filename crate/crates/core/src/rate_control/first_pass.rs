use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{FirstPassRecord, RcConfig};
use crate::analyzer::FrameFeatures;
use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::seed;
use crate::sim::{self, SimParams};

/// Anything that can estimate intra-frame bits from features and a QP.
pub trait BitsPredictor: Sync {
    fn predict_bits(&self, features: &FrameFeatures, q: i32) -> Result<f64>;
}

impl BitsPredictor for ForestModel {
    fn predict_bits(&self, features: &FrameFeatures, q: i32) -> Result<f64> {
        self.predict(features, q)
    }
}

/// Perfect predictor: the simulator's own rate law.
#[derive(Debug, Clone, Copy)]
pub struct SimPredictor {
    pub pixels: usize,
    pub params: SimParams,
}

impl BitsPredictor for SimPredictor {
    fn predict_bits(&self, features: &FrameFeatures, q: i32) -> Result<f64> {
        sim::sim_bits(features, q, self.pixels, &self.params)
    }
}

/// One record per frame at the configured first-pass QP.
pub fn build_first_pass<P: BitsPredictor + ?Sized>(
    features: &[FrameFeatures],
    predictor: &P,
    cfg: &RcConfig,
) -> Result<Vec<FirstPassRecord>> {
    if features.is_empty() {
        return Err(Error::NoFrames);
    }
    cfg.validate()?;
    let q_p = cfg.first_pass_qp;
    features
        .par_iter()
        .map(|f| {
            let b_hat = predictor.predict_bits(f, q_p)?;
            if !b_hat.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite prediction for frame {}", f.frame_index)));
            }
            Ok(FirstPassRecord { frame_index: f.frame_index, q_p, b_hat_p: b_hat.max(1.0) })
        })
        .collect()
}

/// Worst-case baseline: `b̂_p = max(1, round(N(b_base, b_base^2)))`.
pub fn build_noise_first_pass(n_frames: usize, cfg: &RcConfig, seed: u64) -> Result<Vec<FirstPassRecord>> {
    if n_frames == 0 {
        return Err(Error::NoFrames);
    }
    cfg.validate()?;
    let mu = cfg.base_budget();
    let normal = Normal::new(mu, mu).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = seed::rng(seed);
    Ok((0..n_frames)
        .map(|frame_index| FirstPassRecord {
            frame_index,
            q_p: cfg.first_pass_qp,
            b_hat_p: normal.sample(&mut rng).round().max(1.0),
        })
        .collect())
}
