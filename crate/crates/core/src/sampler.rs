//! Bilinear sampling at fractional pixel coordinates with replicate padding.
//!
//! `x` indexes columns and `y` rows; `(0, 0)` is the center of the top-left
//! pixel. Coordinates outside `[0, W-1] x [0, H-1]` are clamped to the border.

use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePos {
    pub x: f64,
    pub y: f64,
}

impl SamplePos {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Derivatives of one bilinear sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearPartials {
    pub d_x: f64,
    pub d_y: f64,
    /// `(row * width + col, weight)` for the four contributing pixels.
    pub d_corners: [(usize, f64); 4],
}

/// Neighbour indices and fractional position along one axis.
#[derive(Debug, Clone, Copy)]
struct AxisTap {
    i0: usize,
    i1: usize,
    frac: f64,
    /// Sample does not move when the coordinate moves (clamped, or a 1-pixel axis).
    frozen: bool,
}

#[inline]
fn axis_tap(coord: f64, n: usize) -> AxisTap {
    if n == 1 {
        return AxisTap { i0: 0, i1: 0, frac: 0.0, frozen: true };
    }
    let last = (n - 1) as f64;
    if coord < 0.0 {
        AxisTap { i0: 0, i1: 1, frac: 0.0, frozen: true }
    } else if coord > last {
        AxisTap { i0: n - 2, i1: n - 1, frac: 1.0, frozen: true }
    } else {
        // At an integer the segment to the right is used, except on the last
        // pixel where only the left segment exists.
        let i0 = (coord.floor() as usize).min(n - 2);
        AxisTap { i0, i1: i0 + 1, frac: coord - i0 as f64, frozen: false }
    }
}

/// Precomputed bilinear stencil for one position; reusable across channels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    /// Pixel indices `row * width + col` of the four corners.
    pub idx: [usize; 4],
    pub w: [f64; 4],
    fx: f64,
    fy: f64,
    frozen_x: bool,
    frozen_y: bool,
}

impl Stencil {
    #[inline]
    pub fn new(height: usize, width: usize, pos: SamplePos) -> Self {
        let ax = axis_tap(pos.x, width);
        let ay = axis_tap(pos.y, height);
        let (fx, fy) = (ax.frac, ay.frac);
        Self {
            idx: [
                ay.i0 * width + ax.i0,
                ay.i0 * width + ax.i1,
                ay.i1 * width + ax.i0,
                ay.i1 * width + ax.i1,
            ],
            w: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
            fx,
            fy,
            frozen_x: ax.frozen,
            frozen_y: ay.frozen,
        }
    }

    #[inline]
    fn corners(&self, frame: &Frame, channel: usize) -> [f64; 4] {
        let c = frame.channels();
        let d = frame.data();
        self.idx.map(|i| d[i * c + channel])
    }

    #[inline]
    pub fn sample(&self, frame: &Frame, channel: usize) -> f64 {
        let v = self.corners(frame, channel);
        self.w[0] * v[0] + self.w[1] * v[1] + self.w[2] * v[2] + self.w[3] * v[3]
    }

    /// Sampled value together with its spatial derivatives.
    #[inline]
    pub fn sample_with_grad(&self, frame: &Frame, channel: usize) -> (f64, f64, f64) {
        let v = self.corners(frame, channel);
        let value = self.w[0] * v[0] + self.w[1] * v[1] + self.w[2] * v[2] + self.w[3] * v[3];
        let d_x = if self.frozen_x {
            0.0
        } else {
            (1.0 - self.fy) * (v[1] - v[0]) + self.fy * (v[3] - v[2])
        };
        let d_y = if self.frozen_y {
            0.0
        } else {
            (1.0 - self.fx) * (v[2] - v[0]) + self.fx * (v[3] - v[1])
        };
        (value, d_x, d_y)
    }
}

fn check_channel(frame: &Frame, channel: usize) -> Result<()> {
    if channel >= frame.channels() {
        return Err(Error::Index(format!(
            "channel {channel} out of range for a {}-channel frame",
            frame.channels()
        )));
    }
    Ok(())
}

pub fn bilinear_sample(frame: &Frame, channel: usize, pos: SamplePos) -> Result<f64> {
    check_channel(frame, channel)?;
    if !pos.x.is_finite() || !pos.y.is_finite() {
        return Err(Error::Domain("sample position must be finite".into()));
    }
    Ok(Stencil::new(frame.height(), frame.width(), pos).sample(frame, channel))
}

pub fn bilinear_partials(frame: &Frame, channel: usize, pos: SamplePos) -> Result<BilinearPartials> {
    check_channel(frame, channel)?;
    if !pos.x.is_finite() || !pos.y.is_finite() {
        return Err(Error::Domain("sample position must be finite".into()));
    }
    let st = Stencil::new(frame.height(), frame.width(), pos);
    let (_, d_x, d_y) = st.sample_with_grad(frame, channel);
    Ok(BilinearPartials {
        d_x,
        d_y,
        d_corners: [
            (st.idx[0], st.w[0]),
            (st.idx[1], st.w[1]),
            (st.idx[2], st.w[2]),
            (st.idx[3], st.w[3]),
        ],
    })
}
