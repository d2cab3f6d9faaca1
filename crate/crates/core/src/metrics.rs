//! Quality and rate evaluation: PSNR, component-weighted PSNR, Bjøntegaard
//! delta rate and bitrate deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate_control::{FrameDecision, RcConfig};

/// Reported in place of infinity for identical content.
pub const PSNR_CAP: f64 = 99.99;

pub fn psnr(reference: &[u16], distorted: &[u16], max_value: f64) -> Result<f64> {
    if reference.len() != distorted.len() {
        return Err(Error::InvalidInput(format!("plane length mismatch: {} vs {}", reference.len(), distorted.len())));
    }
    if reference.is_empty() {
        return Err(Error::InvalidInput("cannot compute PSNR of an empty plane".into()));
    }
    if max_value.is_nan() || max_value <= 0.0 {
        return Err(Error::InvalidInput(format!("max value {max_value} must be positive")));
    }
    let sse: u64 = reference
        .iter()
        .zip(distorted)
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP);
    }
    let mse = sse as f64 / reference.len() as f64;
    Ok((10.0 * (max_value * max_value / mse).log10()).min(PSNR_CAP))
}

/// `(6 * Y + U + V) / 8`
pub fn psnr_yuv(py: f64, pu: f64, pv: f64) -> f64 {
    (6.0 * py + pu + pv) / 8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Bits per second.
    pub bitrate: f64,
    pub psnr_yuv: f64,
}

/// At least four rate points, sorted by increasing bitrate, with
/// non-decreasing quality.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    /// Sorts by bitrate, then validates.
    pub fn new(mut points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::InvalidCurve(format!("need at least 4 points, got {}", points.len())));
        }
        for p in &points {
            if !(p.bitrate.is_finite() && p.bitrate > 0.0) {
                return Err(Error::InvalidCurve(format!("bitrate {} must be positive", p.bitrate)));
            }
            if !p.psnr_yuv.is_finite() {
                return Err(Error::InvalidCurve("PSNR must be finite".into()));
            }
        }
        points.sort_by(|a, b| a.bitrate.total_cmp(&b.bitrate));
        for w in points.windows(2) {
            if w[1].bitrate <= w[0].bitrate {
                return Err(Error::InvalidCurve(format!("duplicate bitrate {}", w[0].bitrate)));
            }
            if w[1].psnr_yuv < w[0].psnr_yuv {
                return Err(Error::InvalidCurve(format!(
                    "PSNR drops from {} to {} as bitrate rises",
                    w[0].psnr_yuv, w[1].psnr_yuv
                )));
            }
        }
        Ok(RdCurve { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn psnr_range(&self) -> (f64, f64) {
        (self.points[0].psnr_yuv, self.points[self.points.len() - 1].psnr_yuv)
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson
/// slopes with the three-point end condition).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// `x` must be strictly increasing with at least two knots.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidInput("PCHIP needs at least two knots".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("PCHIP knots must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
            return Ok(Pchip { x, y, slopes });
        }
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Pchip { x, y, slopes })
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.slopes[k] + h01 * self.y[k + 1] + h11 * h * self.slopes[k + 1]
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Integral of `f - g` over `[lo, hi]`, exact for piecewise cubics whose
/// knots are all in `breaks`.
fn integrate_difference(f: &Pchip, g: &Pchip, lo: f64, hi: f64) -> f64 {
    // 3-point Gauss-Legendre on each piece.
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut breaks: Vec<f64> =
        f.knots().iter().chain(g.knots()).copied().filter(|&t| t > lo && t < hi).chain([lo, hi]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
            half * NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(&z, wt)| {
                    let t = mid + half * z;
                    wt * (f.eval(t) - g.eval(t))
                })
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdRateReport {
    pub bd_rate_percent: f64,
    pub psnr_overlap: [f64; 2],
    pub method: String,
}

pub const BD_METHOD: &str = "pchip-log10-rate";

fn log_rate_interpolant(curve: &RdCurve) -> Result<Pchip> {
    let pts = curve.points();
    if pts.windows(2).any(|w| w[1].psnr_yuv <= w[0].psnr_yuv) {
        return Err(Error::InvalidCurve("BD-rate needs strictly increasing PSNR along the curve".into()));
    }
    Pchip::new(pts.iter().map(|p| p.psnr_yuv).collect(), pts.iter().map(|p| p.bitrate.log10()).collect())
}

/// Average rate difference of `test` against `anchor` at equal quality, in
/// percent. Positive means `test` needs more bits.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<BdRateReport> {
    let fa = log_rate_interpolant(anchor)?;
    let ft = log_rate_interpolant(test)?;
    let (a_lo, a_hi) = anchor.psnr_range();
    let (t_lo, t_hi) = test.psnr_range();
    let (lo, hi) = (a_lo.max(t_lo), a_hi.min(t_hi));
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::NoPsnrOverlap);
    }
    let mean_diff = integrate_difference(&ft, &fa, lo, hi) / (hi - lo);
    Ok(BdRateReport {
        bd_rate_percent: 100.0 * (10f64.powf(mean_diff) - 1.0),
        psnr_overlap: [lo, hi],
        method: BD_METHOD.to_string(),
    })
}

/// `100 * (sum(actual) - n * b_base) / (n * b_base)`
pub fn bitrate_deviation(trace: &[FrameDecision], cfg: &RcConfig) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::NoFrames);
    }
    let mut total = 0.0;
    for d in trace {
        total += d
            .actual_bits
            .ok_or_else(|| Error::InvalidInput(format!("frame {} has not been encoded", d.frame_index)))?;
    }
    let budget = trace.len() as f64 * cfg.base_budget();
    Ok(100.0 * (total - budget) / budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::VideoGeometry;

    fn curve(points: &[(f64, f64)]) -> RdCurve {
        RdCurve::new(points.iter().map(|&(bitrate, psnr_yuv)| RdPoint { bitrate, psnr_yuv }).collect()).unwrap()
    }

    #[test]
    fn psnr_values() {
        let a = vec![10u16; 100];
        assert_eq!(psnr(&a, &a, 255.0).unwrap(), PSNR_CAP);
        let b = vec![11u16; 100];
        assert!((psnr(&a, &b, 255.0).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        let z = vec![0u16; 64];
        let f = vec![255u16; 64];
        assert_eq!(psnr(&z, &f, 255.0).unwrap(), 0.0);
        assert!(psnr(&a, &z, 255.0).is_err());
    }

    #[test]
    fn psnr_yuv_weights() {
        assert_eq!(psnr_yuv(40.0, 40.0, 40.0), 40.0);
        assert_eq!(psnr_yuv(48.0, 40.0, 40.0), 46.0);
        assert_eq!(psnr_yuv(0.0, 0.0, 0.0), 0.0);
        assert_ne!(psnr_yuv(48.0, 40.0, 40.0), psnr_yuv(40.0, 48.0, 40.0));
    }

    #[test]
    fn curve_validation() {
        let ok = [(100.0, 30.0), (200.0, 33.0), (400.0, 36.0), (800.0, 39.0)];
        assert!(RdCurve::new(ok.iter().rev().map(|&(b, p)| RdPoint { bitrate: b, psnr_yuv: p }).collect()).is_ok());
        let short: Vec<_> = ok[..3].iter().map(|&(b, p)| RdPoint { bitrate: b, psnr_yuv: p }).collect();
        assert!(RdCurve::new(short).is_err());
        let bad = [(100.0, 30.0), (200.0, 29.0), (400.0, 36.0), (800.0, 39.0)];
        assert!(RdCurve::new(bad.iter().map(|&(b, p)| RdPoint { bitrate: b, psnr_yuv: p }).collect()).is_err());
        let neg = [(-1.0, 30.0), (200.0, 31.0), (400.0, 36.0), (800.0, 39.0)];
        assert!(RdCurve::new(neg.iter().map(|&(b, p)| RdPoint { bitrate: b, psnr_yuv: p }).collect()).is_err());
    }

    #[test]
    fn pchip_reproduces_knots_and_lines() {
        let p = Pchip::new(vec![0.0, 1.0, 3.0, 4.0], vec![1.0, 3.0, 7.0, 9.0]).unwrap();
        for (x, y) in [(0.0, 1.0), (1.0, 3.0), (3.0, 7.0), (4.0, 9.0), (2.0, 5.0), (3.5, 8.0)] {
            assert!((p.eval(x) - y).abs() < 1e-12, "{x}");
        }
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0, 0.1, 5.0, 5.1, 5.2]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = p.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn bd_identity_and_scaling() {
        let a = curve(&[(1000.0, 30.0), (1800.0, 33.0), (3500.0, 36.5), (7000.0, 40.0)]);
        assert_eq!(a.points().len(), 4);
        assert!(bd_rate(&a, &a).unwrap().bd_rate_percent.abs() < 1e-12);
        let scaled = curve(&[(1100.0, 30.0), (1980.0, 33.0), (3850.0, 36.5), (7700.0, 40.0)]);
        let r = bd_rate(&a, &scaled).unwrap();
        assert!((r.bd_rate_percent - 10.0).abs() < 1e-9, "{}", r.bd_rate_percent);
        assert_eq!(r.psnr_overlap, [30.0, 40.0]);
        assert_eq!(r.method, BD_METHOD);
    }

    #[test]
    fn bd_partial_overlap_and_disjoint() {
        let a = curve(&[(1000.0, 30.0), (2000.0, 33.0), (4000.0, 36.0), (8000.0, 39.0)]);
        let b = curve(&[(1000.0, 40.0), (2000.0, 41.0), (4000.0, 42.0), (8000.0, 43.0)]);
        assert!(matches!(bd_rate(&a, &b), Err(Error::NoPsnrOverlap)));
        // Same log-linear law shifted by 3 dB overlaps on [33, 39].
        let c = curve(&[(1000.0, 33.0), (2000.0, 36.0), (4000.0, 39.0), (8000.0, 42.0)]);
        let r = bd_rate(&a, &c).unwrap();
        assert_eq!(r.psnr_overlap, [33.0, 39.0]);
        // At equal PSNR, c needs half the rate of a.
        assert!((r.bd_rate_percent + 50.0).abs() < 1e-9, "{}", r.bd_rate_percent);
    }

    #[test]
    fn deviation() {
        let cfg = RcConfig::new(3000.0, VideoGeometry::yuv420_8bit(64, 64, 30, 1).unwrap());
        let mk = |bits: f64| FrameDecision {
            frame_index: 0,
            q_p: 32,
            b_hat_p: 100.0,
            b_prime_p: 100.0,
            q_bar_p: 32.0,
            q_prime_p: 32,
            actual_bits: Some(bits),
            deficit: None,
        };
        let even = vec![mk(100.0); 100];
        assert_eq!(bitrate_deviation(&even, &cfg).unwrap(), 0.0);
        let mut one_over = vec![mk(100.0); 99];
        one_over.push(mk(200.0));
        assert!((bitrate_deviation(&one_over, &cfg).unwrap() - 1.0).abs() < 1e-12);
        assert!(bitrate_deviation(&[], &cfg).is_err());
    }
}
