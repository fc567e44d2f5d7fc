//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's sampling, interpolation or metric
//! code; every formula is written out directly.

#![allow(dead_code)]

use gdconv_core::{Field, Frame};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_frame(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Frame {
    Frame::new(h, w, c, (0..h * w * c).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

pub fn random_field(rng: &mut ChaCha8Rng, h: usize, w: usize, d: usize, lo: f64, hi: f64) -> Field {
    Field::new(h, w, d, (0..h * w * d).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Pixel value with replicate padding on out-of-range indices.
pub fn pixel_clamped(f: &Frame, row: i64, col: i64, ch: usize) -> f64 {
    let r = row.clamp(0, f.height() as i64 - 1) as usize;
    let c = col.clamp(0, f.width() as i64 - 1) as usize;
    f.data()[(r * f.width() + c) * f.channels() + ch]
}

/// Bilinear interpolation at column `x`, row `y`, after clamping the
/// coordinates to the frame.
pub fn bilinear(f: &Frame, x: f64, y: f64, ch: usize) -> f64 {
    let x = x.clamp(0.0, (f.width() - 1) as f64);
    let y = y.clamp(0.0, (f.height() - 1) as f64);
    let (x0, y0) = (x.floor(), y.floor());
    let (ax, ay) = (x - x0, y - y0);
    let (c0, r0) = (x0 as i64, y0 as i64);
    let p = |r: i64, c: i64| pixel_clamped(f, r, c, ch);
    (1.0 - ay) * ((1.0 - ax) * p(r0, c0) + ax * p(r0, c0 + 1)) + ay * ((1.0 - ax) * p(r0 + 1, c0) + ax * p(r0 + 1, c0 + 1))
}

/// Fixed-kernel adaptive convolution: each frame `i` is filtered with its own
/// per-pixel `k x k` kernel, taps stored at depth `i * k^2 + (p * k + q)` for
/// row offset `p - r` and column offset `q - r`.
pub fn conventional_oracle(frames: &[Frame], kernels: &Field, k: usize) -> Frame {
    let (h, w, c) = frames[0].shape();
    let r = (k / 2) as i64;
    let mut out = vec![0.0; h * w * c];
    for row in 0..h {
        for col in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, f) in frames.iter().enumerate() {
                    for p in 0..k {
                        for q in 0..k {
                            let tap = kernels.get(row, col, i * k * k + p * k + q);
                            acc += tap * pixel_clamped(f, row as i64 + p as i64 - r, col as i64 + q as i64 - r, ch);
                        }
                    }
                }
                out[(row * w + col) * c + ch] = acc;
            }
        }
    }
    Frame::new(h, w, c, out).unwrap()
}

/// Deformable convolution with `m` adaptive taps per frame; tap `j = i * m + t`
/// reads frame `i` at the offset `(dx_j, dy_j)`.
pub fn adacof_oracle(frames: &[Frame], weights: &Field, dx: &Field, dy: &Field, m: usize) -> Frame {
    let (h, w, c) = frames[0].shape();
    let mut out = vec![0.0; h * w * c];
    for row in 0..h {
        for col in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, f) in frames.iter().enumerate() {
                    for t in 0..m {
                        let j = i * m + t;
                        let x = col as f64 + dx.get(row, col, j);
                        let y = row as f64 + dy.get(row, col, j);
                        acc += weights.get(row, col, j) * bilinear(f, x, y, ch);
                    }
                }
                out[(row * w + col) * c + ch] = acc;
            }
        }
    }
    Frame::new(h, w, c, out).unwrap()
}

/// Backward warping by a dense flow.
pub fn flow_oracle(source: &Frame, u: &Field, v: &Field) -> Frame {
    let (h, w, c) = source.shape();
    let mut out = vec![0.0; h * w * c];
    for row in 0..h {
        for col in 0..w {
            for ch in 0..c {
                out[(row * w + col) * c + ch] =
                    bilinear(source, col as f64 + u.get(row, col, 0), row as f64 + v.get(row, col, 0), ch);
            }
        }
    }
    Frame::new(h, w, c, out).unwrap()
}

/// Lagrange interpolation through `(i, values[i])`, written as the sum of basis polynomials.
pub fn lagrange(z: f64, values: &[f64]) -> f64 {
    let mut total = 0.0;
    for (j, vj) in values.iter().enumerate() {
        let mut basis = 1.0;
        for m in 0..values.len() {
            if m != j {
                basis *= (z - m as f64) / (j as f64 - m as f64);
            }
        }
        total += vj * basis;
    }
    total
}

pub fn mse_oracle(a: &Frame, b: &Frame) -> f64 {
    let mut s = 0.0;
    for i in 0..a.data().len() {
        let d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    s / a.data().len() as f64
}

/// Mean SSIM by direct summation over every valid 2-D Gaussian window.
pub fn ssim_oracle(a: &Frame, b: &Frame, window: usize, sigma: f64, k1: f64, k2: f64, range: f64) -> f64 {
    let (h, w, ch) = a.shape();
    let r = (window / 2) as f64;
    let mut g = vec![0.0; window * window];
    for p in 0..window {
        for q in 0..window {
            let (dy, dx) = (p as f64 - r, q as f64 - r);
            g[p * window + q] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let gs: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= gs);
    let c1 = (k1 * range) * (k1 * range);
    let c2 = (k2 * range) * (k2 * range);
    let mut total = 0.0;
    for c in 0..ch {
        let mut sum = 0.0;
        let mut count = 0;
        for top in 0..=h - window {
            for left in 0..=w - window {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for p in 0..window {
                    for q in 0..window {
                        let wt = g[p * window + q];
                        let x = a.get(top + p, left + q, c);
                        let y = b.get(top + p, left + q, c);
                        ma += wt * x;
                        mb += wt * y;
                        saa += wt * x * x;
                        sbb += wt * y * y;
                        sab += wt * x * y;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        total += sum / count as f64;
    }
    total / ch as f64
}
