//! Full-reference image quality metrics: PSNR, SSIM and interpolation error.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Returned by [`psnr`] for identical inputs.
pub const PSNR_IDENTICAL_DB: f64 = 99.0;

fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.ensure_same_shape(b, "metric inputs")?;
    let n = a.data().len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB.
pub fn psnr(a: &Frame, b: &Frame, peak: f64) -> Result<f64> {
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Domain(format!("peak must be positive, got {peak}")));
    }
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(PSNR_IDENTICAL_DB);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Root-mean-square difference on the 0-255 scale.
pub fn interpolation_error(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(255.0 * mse(a, b)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimCfg {
    /// Odd Gaussian window size.
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimCfg {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimCfg {
    fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Domain(format!("SSIM window must be odd and >= 3, got {}", self.window)));
        }
        if !(self.sigma > 0.0) || !(self.dynamic_range > 0.0) {
            return Err(Error::Domain("SSIM sigma and dynamic range must be positive".into()));
        }
        Ok(())
    }

    /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
    pub fn taps(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }
}

/// Valid-mode separable filtering of one channel.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = taps.iter().enumerate().map(|(j, t)| t * src[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = taps.iter().enumerate().map(|(j, t)| t * rows[(r + j) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity over all valid window positions, averaged over channels.
pub fn ssim(a: &Frame, b: &Frame, cfg: &SsimCfg) -> Result<f64> {
    cfg.validate()?;
    a.ensure_same_shape(b, "ssim inputs")?;
    let (h, w, ch) = a.shape();
    if h < cfg.window || w < cfg.window {
        return Err(Error::Shape(format!(
            "{h}x{w} frame is smaller than the {0}x{0} SSIM window",
            cfg.window
        )));
    }
    let taps = cfg.taps();
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
    let mut total = 0.0;
    for c in 0..ch {
        let plane = |f: &Frame| -> Vec<f64> { f.data().iter().skip(c).step_by(ch).copied().collect() };
        let (pa, pb) = (plane(a), plane(b));
        let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let mu_a = filter_valid(&pa, h, w, &taps);
        let mu_b = filter_valid(&pb, h, w, &taps);
        let e_aa = filter_valid(&prod(&pa, &pa), h, w, &taps);
        let e_bb = filter_valid(&prod(&pb, &pb), h, w, &taps);
        let e_ab = filter_valid(&prod(&pa, &pb), h, w, &taps);
        let mut sum = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += sum / mu_a.len() as f64;
    }
    Ok(total / ch as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(n: usize) -> Frame {
        Frame::new(n, n, 1, (0..n * n).map(|i| ((i / n + i % n) % 2) as f64).collect()).unwrap()
    }

    #[test]
    fn psnr_cases() {
        let a = Frame::filled(3, 3, 1, 0.2);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), 99.0);
        let one = Frame::filled(1, 1, 1, 1.0);
        let nine = Frame::filled(1, 1, 1, 0.9);
        assert!((psnr(&one, &nine, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let b = Frame::filled(3, 3, 1, 0.7);
        assert!((psnr(&a, &b, 1.0).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-12);
        assert!((psnr(&a, &b, 1.0).unwrap() - 6.0206).abs() < 1e-4);
        assert!(psnr(&a, &b, 0.0).is_err());
        assert!(psnr(&a, &Frame::zeros(3, 2, 1), 1.0).is_err());
    }

    #[test]
    fn ie_cases() {
        let a = Frame::filled(4, 4, 3, 0.5);
        assert_eq!(interpolation_error(&a, &a).unwrap(), 0.0);
        let b = Frame::filled(4, 4, 3, 0.5 + 1.0 / 255.0);
        assert!((interpolation_error(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = Frame::filled(4, 4, 3, 0.5 + 3.0 / 255.0);
        assert!((interpolation_error(&a, &c).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_self_and_inverse() {
        let a = checker(16);
        assert!((ssim(&a, &a, &SsimCfg::default()).unwrap() - 1.0).abs() < 1e-9);
        let inv = Frame::new(16, 16, 1, a.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&a, &inv, &SsimCfg::default()).unwrap() < 0.0);
    }

    #[test]
    fn ssim_rejects_small_frames_and_even_windows() {
        let a = Frame::zeros(8, 20, 1);
        assert!(ssim(&a, &a, &SsimCfg::default()).is_err());
        let cfg = SsimCfg { window: 4, ..SsimCfg::default() };
        assert!(ssim(&checker(16), &checker(16), &cfg).is_err());
    }

    #[test]
    fn taps_sum_to_one() {
        let t = SsimCfg::default().taps();
        assert_eq!(t.len(), 11);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
