//! All-intra two-pass rate control.
//!
//! The first encoding pass is replaced by a cheap analysis: every frame is
//! reduced to six DCT-energy features ([`analyzer`]), and a random-forest
//! regressor ([`forest`]) predicts the bits an intra frame would cost at a
//! given QP. The second pass ([`rate_control`]) turns those predictions into
//! per-frame QPs through a logarithmic R-QP model and carries a bit deficit
//! from frame to frame.
//!
//! [`sim`] provides a parametric encoder used as a closed-loop oracle, and
//! [`metrics`] holds PSNR, BD-rate and bitrate-deviation reporting.

pub mod analyzer;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod rate_control;
pub mod schema;
pub mod seed;
pub mod sim;
pub mod video;

pub use analyzer::{extract_features, extract_sequence, AnalyzerConfig, FrameFeatures};
pub use error::{Error, ModelFileError, Result};
pub use forest::{ForestHyperparams, ForestModel, Importance, TrainingSample, FEATURE_NAMES};
pub use metrics::{bd_rate, bitrate_deviation, psnr, psnr_yuv, BdRateReport, RdCurve, RdPoint};
pub use rate_control::{
    build_first_pass, build_noise_first_pass, c_high_for, compute_target_bits, map_qp, run_second_pass, EncoderOracle,
    FirstPassRecord, FrameDecision, LogEncoder, RcConfig, RcState, RcSummary, SecondPassRun, SimEncoder,
};
pub use sim::{generate_dataset, sim_bits, sim_psnr, SimParams};
pub use video::{open_raw_yuv, open_y4m, ChromaFormat, PlanarFrame, VideoGeometry};

/// Largest QP accepted anywhere in the toolkit (VVC range).
pub const MAX_QP: i32 = 63;
