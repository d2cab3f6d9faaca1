//! Parametric intra encoder used as a stand-in for a real codec.
//!
//! Rate model: `bits = kappa * pixels * (0.01 + e_y)^gamma * 2^(-q / delta) * n`,
//! with `n` an optional lognormal factor drawn per (frame, QP) from the
//! parameter seed. Quality model: `psnr = pi0 - pi1 * q`, clamped to [20, 99] dB.
//!
//! `delta` is the QP step that halves the rate. The default of 6 matches
//! `c_low = 1` in the second-pass QP mapping around q = 36; retune `c_low`
//! when changing it.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analyzer::FrameFeatures;
use crate::error::{Error, Result};
use crate::forest::{check_qp, TrainingSample};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Bits per pixel at `e_y + 0.01 = 1`, `q = 0`.
    pub kappa: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Log-domain standard deviation of the multiplicative noise.
    pub noise_sigma: f64,
    pub psnr_intercept: f64,
    pub psnr_slope: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            kappa: 10.0,
            gamma: 0.8,
            delta: 6.0,
            noise_sigma: 0.0,
            psnr_intercept: 60.0,
            psnr_slope: 0.7,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > 0.0
            && self.delta > 0.0
            && self.noise_sigma >= 0.0
            && self.psnr_slope > 0.0
            && [self.kappa, self.gamma, self.delta, self.noise_sigma, self.psnr_intercept, self.psnr_slope]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid simulator parameters {self:?}")))
        }
    }

    /// Noise-free expected rate before rounding.
    pub fn rate_law(&self, e_y: f64, q: f64, pixels: f64) -> f64 {
        self.kappa * pixels * (0.01 + e_y).powf(self.gamma) * (-q / self.delta).exp2()
    }
}

/// Noise factor for a given frame and QP; 1 when noise is off.
fn noise_factor(params: &SimParams, frame_index: usize, q: i32) -> f64 {
    if params.noise_sigma == 0.0 {
        return 1.0;
    }
    let mut rng = seed::child_rng(seed::derive(params.seed, frame_index as u64), q as u64);
    let z: f64 = StandardNormal.sample(&mut rng);
    (params.noise_sigma * z).exp()
}

pub fn sim_bits(features: &FrameFeatures, q: i32, pixels: usize, params: &SimParams) -> Result<f64> {
    check_qp(q)?;
    if pixels == 0 {
        return Err(Error::InvalidInput("pixel count must be positive".into()));
    }
    let n = noise_factor(params, features.frame_index, q);
    let bits = params.rate_law(features.e_y, q as f64, pixels as f64) * n;
    Ok(bits.round().max(1.0))
}

pub fn sim_psnr(q: i32, params: &SimParams) -> Result<f64> {
    check_qp(q)?;
    Ok((params.psnr_intercept - params.psnr_slope * q as f64).clamp(20.0, 99.0))
}

/// QP range used for synthetic training samples.
pub const DATASET_QP_RANGE: std::ops::RangeInclusive<i32> = 18..=48;

fn random_features<R: Rng>(rng: &mut R, frame_index: usize) -> FrameFeatures {
    FrameFeatures {
        frame_index,
        e_y: rng.random_range(0.0..1.0),
        l_y: rng.random_range(0.0..1.0),
        e_u: rng.random_range(0.0..0.5),
        l_u: rng.random_range(0.0..1.0),
        e_v: rng.random_range(0.0..0.5),
        l_v: rng.random_range(0.0..1.0),
    }
}

/// `n` samples with uniformly drawn features and QPs, labelled by [`sim_bits`].
/// Sample `i` carries `frame_index = i`, which keys its noise draw.
pub fn generate_dataset(n: usize, pixels: usize, params: &SimParams, seed: u64) -> Result<Vec<TrainingSample>> {
    if n == 0 {
        return Err(Error::InvalidInput("dataset size must be at least 1".into()));
    }
    params.validate()?;
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|i| {
            let features = random_features(&mut rng, i);
            let q = rng.random_range(DATASET_QP_RANGE);
            let bits = sim_bits(&features, q, pixels, params)?;
            Ok(TrainingSample { features, q, bits })
        })
        .collect()
}

/// A feature trace that looks like edited content: scenes of 15 to 60 frames
/// with their own texture level, plus small per-frame jitter.
pub fn synthetic_sequence(n_frames: usize, seed: u64) -> Vec<FrameFeatures> {
    let mut rng = seed::child_rng(seed, 0x5CE4E);
    let mut out = Vec::with_capacity(n_frames);
    while out.len() < n_frames {
        let scene_len = rng.random_range(15..=60);
        let base = random_features(&mut rng, 0);
        let e_y = rng.random_range(0.03..0.7);
        for _ in 0..scene_len {
            if out.len() == n_frames {
                break;
            }
            let mut jitter = |v: f64, hi: f64| (v * rng.random_range(0.95..1.05)).clamp(0.0, hi);
            out.push(FrameFeatures {
                frame_index: out.len(),
                e_y: jitter(e_y, 1.0),
                l_y: jitter(base.l_y, 1.0),
                e_u: jitter(base.e_u, 0.5),
                l_u: jitter(base.l_u, 1.0),
                e_v: jitter(base.e_v, 0.5),
                l_v: jitter(base.l_v, 1.0),
            });
        }
    }
    out
}
