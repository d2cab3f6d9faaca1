//! DCT-energy spatial complexity features.
//!
//! Every plane is tiled into `w`x`w` blocks (edge blocks replicate the last
//! row/column). For each block the orthonormal 2-D DCT-II is taken and the
//! texture energy is
//!
//! ```text
//! H = sum over (i, j) != (0, 0) of exp(sqrt((i/w)^2 + (j/w)^2)) * |d[i][j]|
//! ```
//!
//! The plane energy is `sum(H) / (K * w^2 * scale)` over the `K` blocks and the
//! plane brightness is `mean(sample) / scale`, where `scale = 255 * 2^(bit_depth - 8)`
//! puts 8-bit and 10-bit content on the same footing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{ChromaFormat, PlanarFrame};

/// The six per-frame complexity values, in model input order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub frame_index: usize,
    pub e_y: f64,
    pub l_y: f64,
    pub e_u: f64,
    pub l_u: f64,
    pub e_v: f64,
    pub l_v: f64,
}

impl FrameFeatures {
    pub fn new(frame_index: usize, values: [f64; 6]) -> Self {
        let [e_y, l_y, e_u, l_u, e_v, l_v] = values;
        FrameFeatures { frame_index, e_y, l_y, e_u, l_u, e_v, l_v }
    }

    /// `[e_y, l_y, e_u, l_u, e_v, l_v]`
    pub fn values(&self) -> [f64; 6] {
        [self.e_y, self.l_y, self.e_u, self.l_u, self.e_v, self.l_v]
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("frame {}: non-finite feature value", self.frame_index)));
        }
        if [self.e_y, self.e_u, self.e_v].iter().any(|&e| e < 0.0) {
            return Err(Error::InvalidInput(format!("frame {}: negative texture energy", self.frame_index)));
        }
        if [self.l_y, self.l_u, self.l_v].iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(Error::InvalidInput(format!("frame {}: average brightness outside [0, 1]", self.frame_index)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub block_size_luma: usize,
    pub block_size_chroma: usize,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig { block_size_luma: 32, block_size_chroma: 16 }
    }
}

impl AnalyzerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, size) in [("luma", self.block_size_luma), ("chroma", self.block_size_chroma)] {
            if !size.is_power_of_two() || !(8..=64).contains(&size) {
                return Err(Error::InvalidInput(format!("{name} block size {size} must be a power of two in [8, 64]")));
            }
        }
        Ok(())
    }
}

/// Orthonormal DCT-II of size `n`, applied separably (rows then columns).
#[derive(Debug, Clone)]
pub struct Dct2 {
    n: usize,
    // basis[k * n + x] = alpha(k) * cos(pi * (2x + 1) * k / 2n)
    basis: Vec<f64>,
}

impl Dct2 {
    pub fn new(n: usize) -> Self {
        let mut basis = vec![0.0; n * n];
        let nf = n as f64;
        for k in 0..n {
            let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            for x in 0..n {
                let angle = std::f64::consts::PI * (2 * x + 1) as f64 * k as f64 / (2.0 * nf);
                basis[k * n + x] = alpha * angle.cos();
            }
        }
        Dct2 { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Row-major `n`x`n` block in, row-major coefficients out (`out[i * n + j]`,
    /// `i` vertical frequency).
    pub fn forward_2d(&self, block: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(block.len(), n * n);
        assert_eq!(out.len(), n * n);
        let mut tmp = vec![0.0; n * n];
        // Horizontal pass: tmp[y][j] = sum_x block[y][x] * C[j][x]
        for y in 0..n {
            let row = &block[y * n..(y + 1) * n];
            for j in 0..n {
                let c = &self.basis[j * n..(j + 1) * n];
                tmp[y * n + j] = row.iter().zip(c).map(|(a, b)| a * b).sum();
            }
        }
        // Vertical pass: out[i][j] = sum_y C[i][y] * tmp[y][j]
        for i in 0..n {
            let c = &self.basis[i * n..(i + 1) * n];
            for j in 0..n {
                out[i * n + j] = (0..n).map(|y| c[y] * tmp[y * n + j]).sum();
            }
        }
    }
}

/// `exp(sqrt((i/w)^2 + (j/w)^2))` with the DC term zeroed.
pub fn energy_weights(w: usize) -> Vec<f64> {
    let wf = w as f64;
    let mut weights = vec![0.0; w * w];
    for i in 0..w {
        for j in 0..w {
            if i == 0 && j == 0 {
                continue;
            }
            let (fi, fj) = (i as f64 / wf, j as f64 / wf);
            weights[i * w + j] = (fi * fi + fj * fj).sqrt().exp();
        }
    }
    weights
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Copies block (`bx`, `by`) out of a plane, replicating the last row/column
/// past the edges.
pub fn gather_block(plane: &[u16], width: usize, height: usize, bx: usize, by: usize, w: usize, out: &mut [f64]) {
    for dy in 0..w {
        let y = (by * w + dy).min(height - 1);
        let row = &plane[y * width..(y + 1) * width];
        for dx in 0..w {
            let x = (bx * w + dx).min(width - 1);
            out[dy * w + dx] = row[x] as f64;
        }
    }
}

/// Per-block texture energies `H_k` in raster order.
///
/// The block mean is removed before the transform. AC coefficients do not
/// depend on it, and flat blocks then come out exactly zero.
pub fn block_energies(plane: &[u16], width: usize, height: usize, dct: &Dct2, weights: &[f64]) -> Vec<f64> {
    let w = dct.size();
    let blocks_x = width.div_ceil(w);
    let blocks_y = height.div_ceil(w);
    let mut block = vec![0.0; w * w];
    let mut coeffs = vec![0.0; w * w];
    let mut energies = Vec::with_capacity(blocks_x * blocks_y);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            gather_block(plane, width, height, bx, by, w, &mut block);
            let mean = block.iter().sum::<f64>() / block.len() as f64;
            block.iter_mut().for_each(|s| *s -= mean);
            dct.forward_2d(&block, &mut coeffs);
            energies.push(compensated_sum(coeffs.iter().zip(weights).map(|(d, wt)| wt * d.abs())));
        }
    }
    energies
}

/// Normalization divisor for a bit depth; 255 for 8-bit, 1020 for 10-bit.
pub fn sample_scale(bit_depth: u8) -> f64 {
    255.0 * f64::from(1u32 << (bit_depth - 8))
}

struct PlaneAnalyzer {
    dct: Dct2,
    weights: Vec<f64>,
}

impl PlaneAnalyzer {
    fn new(w: usize) -> Self {
        PlaneAnalyzer { dct: Dct2::new(w), weights: energy_weights(w) }
    }

    fn analyze(&self, plane: &[u16], width: usize, height: usize, scale: f64) -> (f64, f64) {
        let w = self.dct.size() as f64;
        let energies = block_energies(plane, width, height, &self.dct, &self.weights);
        let energy = compensated_sum(energies.iter().copied()) / (energies.len() as f64 * w * w * scale);
        let total: u64 = plane.iter().map(|&s| s as u64).sum();
        let mean = total as f64 / plane.len() as f64;
        (energy, (mean / scale).min(1.0))
    }
}

/// Reusable analyzer holding the DCT tables for one configuration.
pub struct Analyzer {
    cfg: AnalyzerConfig,
    luma: PlaneAnalyzer,
    chroma: PlaneAnalyzer,
}

impl Analyzer {
    pub fn new(cfg: AnalyzerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Analyzer {
            cfg,
            luma: PlaneAnalyzer::new(cfg.block_size_luma),
            chroma: PlaneAnalyzer::new(cfg.block_size_chroma),
        })
    }

    pub fn config(&self) -> &AnalyzerConfig {
        &self.cfg
    }

    pub fn analyze(&self, frame: &PlanarFrame) -> FrameFeatures {
        let g = frame.geometry();
        let scale = sample_scale(g.bit_depth);
        let (e_y, l_y) = self.luma.analyze(frame.y(), g.width, g.height, scale);
        let ((e_u, l_u), (e_v, l_v)) = match g.chroma {
            ChromaFormat::Yuv420 => {
                let (cw, ch) = g.chroma_dims();
                (self.chroma.analyze(frame.u(), cw, ch, scale), self.chroma.analyze(frame.v(), cw, ch, scale))
            }
            ChromaFormat::Mono => ((0.0, 0.5), (0.0, 0.5)),
        };
        FrameFeatures { frame_index: frame.index(), e_y, l_y, e_u, l_u, e_v, l_v }
    }
}

pub fn extract_features(frame: &PlanarFrame, cfg: &AnalyzerConfig) -> Result<FrameFeatures> {
    Ok(Analyzer::new(*cfg)?.analyze(frame))
}

/// Frames are pulled from the stream in chunks and analyzed in parallel; the
/// output order follows the stream order.
pub fn extract_sequence<I>(frames: I, cfg: &AnalyzerConfig) -> Result<Vec<FrameFeatures>>
where
    I: IntoIterator<Item = Result<PlanarFrame>>,
{
    const CHUNK: usize = 32;
    let analyzer = Analyzer::new(*cfg)?;
    let mut out = Vec::new();
    let mut chunk = Vec::with_capacity(CHUNK);
    let mut frames = frames.into_iter();
    loop {
        chunk.clear();
        for frame in frames.by_ref().take(CHUNK) {
            chunk.push(frame?);
        }
        if chunk.is_empty() {
            break;
        }
        out.par_extend(chunk.par_iter().map(|f| analyzer.analyze(f)));
    }
    if out.is_empty() {
        return Err(Error::NoFrames);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::VideoGeometry;

    fn geom() -> VideoGeometry {
        VideoGeometry::yuv420_8bit(64, 64, 30, 1).unwrap()
    }

    #[test]
    fn constant_frame() {
        let f = PlanarFrame::filled(geom(), 128, 0).unwrap();
        let x = extract_features(&f, &AnalyzerConfig::default()).unwrap();
        assert_eq!(x.e_y, 0.0);
        assert_eq!(x.e_u, 0.0);
        assert_eq!(x.e_v, 0.0);
        for l in [x.l_y, x.l_u, x.l_v] {
            assert!((l - 128.0 / 255.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_frame() {
        let f = PlanarFrame::filled(geom(), 0, 0).unwrap();
        let x = extract_features(&f, &AnalyzerConfig::default()).unwrap();
        assert_eq!(x.values(), [0.0; 6]);
    }

    #[test]
    fn mono_has_neutral_chroma() {
        let g = VideoGeometry::new(64, 64, 8, ChromaFormat::Mono, 30, 1).unwrap();
        let y = (0..g.luma_len()).map(|i| (i % 251) as u16).collect();
        let f = PlanarFrame::new(g, y, vec![], vec![], 0).unwrap();
        let x = extract_features(&f, &AnalyzerConfig::default()).unwrap();
        assert!(x.e_y > 0.0);
        assert_eq!((x.e_u, x.l_u, x.e_v, x.l_v), (0.0, 0.5, 0.0, 0.5));
        x.validate().unwrap();
    }

    #[test]
    fn checkerboard_beats_flat() {
        let g = geom();
        let y = (0..g.luma_len()).map(|i| if (i % 64 + i / 64) % 2 == 0 { 0 } else { 255 }).collect();
        let f = PlanarFrame::new(g, y, vec![128; 1024], vec![128; 1024], 0).unwrap();
        let x = extract_features(&f, &AnalyzerConfig::default()).unwrap();
        assert!(x.e_y > 0.0);
        assert_eq!(x.e_u, 0.0);
    }

    #[test]
    fn block_config_validation() {
        let bad = AnalyzerConfig { block_size_luma: 24, block_size_chroma: 16 };
        assert!(bad.validate().is_err());
        let bad = AnalyzerConfig { block_size_luma: 128, block_size_chroma: 16 };
        assert!(bad.validate().is_err());
        let bad = AnalyzerConfig { block_size_luma: 32, block_size_chroma: 4 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn edge_blocks_replicate() {
        // 72 wide: the last column of blocks is 8 real columns plus 24 replicated.
        let g = VideoGeometry::new(72, 64, 8, ChromaFormat::Mono, 30, 1).unwrap();
        let y: Vec<u16> = (0..g.luma_len()).map(|i| ((i % 72) * 3) as u16).collect();
        let mut block = vec![0.0; 32 * 32];
        gather_block(&y, 72, 64, 2, 0, 32, &mut block);
        assert_eq!(block[0], 64.0 * 3.0);
        assert_eq!(block[7], 71.0 * 3.0);
        assert_eq!(block[31], 71.0 * 3.0);
    }

    #[test]
    fn empty_sequence_errors() {
        let r = extract_sequence(Vec::<Result<PlanarFrame>>::new(), &AnalyzerConfig::default());
        assert!(matches!(r, Err(Error::NoFrames)));
    }

    #[test]
    fn compensated_sum_handles_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
