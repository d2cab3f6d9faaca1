//! Two-pass rate control.
//!
//! The first pass supplies, per frame, a QP `q_p` and a bit estimate `b̂_p` at
//! that QP. The second pass walks the frames in order, derives a target
//! `b'_p` from the per-frame budget and the running deficit, and maps it to
//! a QP with the logarithmic R-QP model
//!
//! ```text
//! q̄  = q_p - c_low * sqrt(max(1, q_p)) * log2(b'_p / b̂_p)
//! q' = round(q̄ + c_high * max(0, q_start - q̄))
//! ```
//!
//! where `c_high` depends on the picture area and the rounding is half away
//! from zero, followed by clipping to `[qp_min, qp_max]`.

mod first_pass;
mod oracle;
mod second_pass;

use serde::{Deserialize, Serialize};

pub use first_pass::{build_first_pass, build_noise_first_pass, BitsPredictor, SimPredictor};
pub use oracle::{EncoderOracle, LogEncoder, LogEntry, SimEncoder};
pub use second_pass::{run_second_pass, RcSummary, SecondPassRun};

use crate::error::{Error, Result};
use crate::video::VideoGeometry;
use crate::MAX_QP;

/// QP below which the high-rate correction kicks in.
pub const Q_START: i32 = 24;

/// `(pixels, c_high)` anchors: 480p and 2160p.
const C_HIGH_ANCHORS: [(f64, f64); 2] = [(854.0 * 480.0, 0.25), (3840.0 * 2160.0, 0.5)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPassRecord {
    pub frame_index: usize,
    pub q_p: i32,
    pub b_hat_p: f64,
}

impl FirstPassRecord {
    pub fn validate(&self) -> Result<()> {
        crate::forest::check_qp(self.q_p)?;
        if !(self.b_hat_p.is_finite() && self.b_hat_p >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "frame {}: first-pass estimate {} must be finite and >= 1",
                self.frame_index, self.b_hat_p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub frame_index: usize,
    pub q_p: i32,
    pub b_hat_p: f64,
    /// Second-pass target in bits.
    pub b_prime_p: f64,
    /// Real-valued QP before the high-rate correction.
    pub q_bar_p: f64,
    pub q_prime_p: i32,
    /// Bits the encoder actually spent; `None` until encoded.
    pub actual_bits: Option<f64>,
    /// Running deficit after this frame.
    pub deficit: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcConfig {
    /// Bits per second.
    pub target_bitrate: f64,
    pub fps_num: u32,
    pub fps_den: u32,
    pub c_low: f64,
    pub q_start: i32,
    pub resolution: VideoGeometry,
    pub first_pass_qp: i32,
    /// Fraction of the deficit paid back per frame.
    pub deficit_gain: f64,
    pub qp_min: i32,
    pub qp_max: i32,
}

impl RcConfig {
    /// Defaults for everything but the rate; frame rate comes from `resolution`.
    pub fn new(target_bitrate: f64, resolution: VideoGeometry) -> Self {
        RcConfig {
            target_bitrate,
            fps_num: resolution.fps_num,
            fps_den: resolution.fps_den,
            c_low: 1.0,
            q_start: Q_START,
            resolution,
            first_pass_qp: 32,
            deficit_gain: 0.5,
            qp_min: 0,
            qp_max: MAX_QP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        if !(self.target_bitrate.is_finite() && self.target_bitrate > 0.0) {
            return fail(format!("target bitrate {} must be positive", self.target_bitrate));
        }
        if self.fps_num == 0 || self.fps_den == 0 {
            return fail(format!("frame rate {}/{} must have positive terms", self.fps_num, self.fps_den));
        }
        if !(self.deficit_gain > 0.0 && self.deficit_gain <= 1.0) {
            return fail(format!("deficit gain {} must lie in (0, 1]", self.deficit_gain));
        }
        if !(self.c_low.is_finite() && self.c_low >= 0.0) {
            return fail(format!("c_low {} must be finite and non-negative", self.c_low));
        }
        if !(0 <= self.qp_min && self.qp_min <= self.qp_max && self.qp_max <= MAX_QP) {
            return fail(format!("QP clip range [{}, {}] is invalid", self.qp_min, self.qp_max));
        }
        crate::forest::check_qp(self.first_pass_qp)?;
        self.resolution.validate()
    }

    pub fn fps(&self) -> f64 {
        self.fps_num as f64 / self.fps_den as f64
    }

    /// Per-frame budget `b_base`.
    pub fn base_budget(&self) -> f64 {
        self.target_bitrate * self.fps_den as f64 / self.fps_num as f64
    }

    pub fn c_high(&self) -> f64 {
        c_high_for(&self.resolution)
    }
}

/// Running deficit bookkeeping for the second pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcState {
    /// Bits spent beyond the budget so far (negative when under).
    pub deficit: f64,
    pub frames_done: usize,
    pub base_budget: f64,
}

impl RcState {
    pub fn new(cfg: &RcConfig) -> Self {
        RcState { deficit: 0.0, frames_done: 0, base_budget: cfg.base_budget() }
    }

    pub fn record(&mut self, actual_bits: f64) {
        self.deficit += actual_bits - self.base_budget;
        self.frames_done += 1;
    }
}

/// `b' = max(1, b_base - gain * deficit)`
pub fn compute_target_bits(state: &RcState, cfg: &RcConfig) -> f64 {
    (state.base_budget - cfg.deficit_gain * state.deficit).max(1.0)
}

/// Rounds half away from zero.
fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Returns `(q̄, q')` for a first-pass record and a second-pass target.
pub fn map_qp(record: &FirstPassRecord, b_prime: f64, cfg: &RcConfig) -> (f64, i32) {
    map_qp_with(record.q_p, record.b_hat_p, b_prime, cfg.c_low, cfg.c_high(), cfg.q_start, cfg.qp_min, cfg.qp_max)
}

#[allow(clippy::too_many_arguments)]
pub fn map_qp_with(
    q_p: i32,
    b_hat: f64,
    b_prime: f64,
    c_low: f64,
    c_high: f64,
    q_start: i32,
    qp_min: i32,
    qp_max: i32,
) -> (f64, i32) {
    let q = q_p as f64;
    let q_bar = q - c_low * q.max(1.0).sqrt() * (b_prime / b_hat).log2();
    let corrected = q_bar + c_high * (q_start as f64 - q_bar).max(0.0);
    let q_prime = round_half_away(corrected).clamp(qp_min as f64, qp_max as f64) as i32;
    (q_bar, q_prime)
}

/// Interpolates `c_high` linearly in `log2(width * height)` between the 480p
/// (0.25) and 2160p (0.5) anchors, clamped outside them.
pub fn c_high_for(resolution: &VideoGeometry) -> f64 {
    let [(a0, c0), (a1, c1)] = C_HIGH_ANCHORS;
    let area = resolution.pixels() as f64;
    let t = (area.log2() - a0.log2()) / (a1.log2() - a0.log2());
    (c0 + t * (c1 - c0)).clamp(c0, c1)
}
