//! Fixtures shared by the benchmarks.

use intrarc::{generate_dataset, FirstPassRecord, PlanarFrame, RcConfig, SimParams, TrainingSample, VideoGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 8-bit 4:2:0 frame of uniform noise.
pub fn noise_frame(width: usize, height: usize, seed: u64) -> PlanarFrame {
    let g = VideoGeometry::yuv420_8bit(width, height, 30, 1).expect("bench geometry");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plane = |n: usize| (0..n).map(|_| rng.random_range(0..=255u16)).collect::<Vec<_>>();
    let (y, u, v) = (plane(g.luma_len()), plane(g.chroma_len()), plane(g.chroma_len()));
    PlanarFrame::new(g, y, u, v, 0).expect("bench frame")
}

/// Simulated 1080p training samples with 10% rate noise.
pub fn training_set(n: usize, seed: u64) -> Vec<TrainingSample> {
    let params = SimParams { noise_sigma: 0.1, ..Default::default() };
    generate_dataset(n, 1920 * 1080, &params, seed).expect("bench dataset")
}

/// A 1080p30 4 Mbps configuration with first-pass records spread around the budget.
pub fn rc_case(n: usize) -> (RcConfig, Vec<FirstPassRecord>) {
    let cfg = RcConfig::new(4e6, VideoGeometry::yuv420_8bit(1920, 1080, 30, 1).expect("bench geometry"));
    let base = cfg.base_budget();
    let records = (0..n)
        .map(|i| FirstPassRecord { frame_index: i, q_p: 32, b_hat_p: base * (0.25 + (i % 16) as f64 / 8.0) })
        .collect();
    (cfg, records)
}
