use crate::error::{Error, Result};
use crate::frame::{Field, Frame, FrameStack};
use crate::interp::{self, InterpKind, InterpPartials, SupportSet};
use crate::sampler::{SamplePos, Stencil};

use super::params::{GDConvParams, GradBundle, OffsetFreedom};

/// Scratch buffers for one sampling point.
struct PointScratch {
    stencils: Vec<Stencil>,
    values: Vec<f64>,
    sdx: Vec<f64>,
    sdy: Vec<f64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
}

impl PointScratch {
    fn new(t1: usize) -> Self {
        let dummy = Stencil::new(1, 1, SamplePos::new(0.0, 0.0));
        Self {
            stencils: vec![dummy; t1],
            values: vec![0.0; t1],
            sdx: vec![0.0; t1],
            sdy: vec![0.0; t1],
            grad_x: vec![0.0; t1],
            grad_y: vec![0.0; t1],
        }
    }

    /// Loads support offsets of point `n` at pixel `(row, col)` and builds their stencils.
    fn load(&mut self, params: &GDConvParams, row: usize, col: usize, n: usize) {
        let npts = params.n_points();
        let (h, w) = (params.height(), params.width());
        let sx = params.sup_dx.pixel(row, col);
        let sy = params.sup_dy.pixel(row, col);
        for i in 0..self.values.len() {
            self.sdx[i] = sx[i * npts + n];
            self.sdy[i] = sy[i * npts + n];
            let pos = SamplePos::new(col as f64 + self.sdx[i], row as f64 + self.sdy[i]);
            self.stencils[i] = Stencil::new(h, w, pos);
        }
    }
}

fn prepare(stack: &FrameStack, params: &GDConvParams, kind: &InterpKind) -> Result<InterpKind> {
    let (h, w, _) = stack.shape();
    params.check_against(h, w, stack.len())?;
    let kind = kind.resolved(h, w, stack.t_max());
    kind.validate()?;
    Ok(kind)
}

/// Synthesizes a frame: every output pixel is the weighted, modulated sum
/// over its `N` sampling points, each interpolated in time from `T+1`
/// bilinearly sampled support points.
pub fn gdconv_forward(stack: &FrameStack, params: &GDConvParams, kind: &InterpKind) -> Result<Frame> {
    let kind = prepare(stack, params, kind)?;
    let (h, w, c) = stack.shape();
    let frames = stack.frames();
    let npts = params.n_points();
    let mut out = Frame::zeros(h, w, c);
    let mut scratch = PointScratch::new(stack.len());
    {
        let data = out.data_mut();
        for row in 0..h {
            for col in 0..w {
                let wts = params.weights.pixel(row, col);
                let mods = params.modulation.pixel(row, col);
                let dxs = params.dx.pixel(row, col);
                let dys = params.dy.pixel(row, col);
                let zs = params.z.pixel(row, col);
                let base = (row * w + col) * c;
                for n in 0..npts {
                    let gain = wts[n] * mods[n];
                    if gain == 0.0 {
                        continue;
                    }
                    scratch.load(params, row, col, n);
                    for ch in 0..c {
                        for (i, st) in scratch.stencils.iter().enumerate() {
                            scratch.values[i] = st.sample(&frames[i], ch);
                        }
                        let support = SupportSet {
                            values: &scratch.values,
                            dx: &scratch.sdx,
                            dy: &scratch.sdy,
                        };
                        data[base + ch] += gain * interp::eval_unchecked(&kind, dxs[n], dys[n], zs[n], &support);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of `sum(upstream * gdconv_forward(stack, params, kind))` with
/// respect to every parameter field and every source frame.
///
/// Groups frozen by the parameters' freedom get exactly zero gradient; tied
/// support offsets pass their gradient on to the sampling offsets.
pub fn gdconv_backward(
    stack: &FrameStack,
    params: &GDConvParams,
    kind: &InterpKind,
    upstream: &Frame,
) -> Result<GradBundle> {
    let kind = prepare(stack, params, kind)?;
    let (h, w, c) = stack.shape();
    if upstream.shape() != (h, w, c) {
        return Err(Error::Shape(format!(
            "upstream {:?} does not match output {:?}",
            upstream.shape(),
            (h, w, c)
        )));
    }
    let frames = stack.frames();
    let npts = params.n_points();
    let t1 = stack.len();
    let mut g_w = vec![0.0; h * w * npts];
    let mut g_m = vec![0.0; h * w * npts];
    let mut g_dx = vec![0.0; h * w * npts];
    let mut g_dy = vec![0.0; h * w * npts];
    let mut g_z = vec![0.0; h * w * npts];
    let mut g_sdx = vec![0.0; h * w * t1 * npts];
    let mut g_sdy = vec![0.0; h * w * t1 * npts];
    let mut g_frames: Vec<Vec<f64>> = vec![vec![0.0; h * w * c]; t1];
    let mut scratch = PointScratch::new(t1);
    let mut partials = InterpPartials::zeros(t1);
    let up = upstream.data();

    for row in 0..h {
        for col in 0..w {
            let p = row * w + col;
            let ups = &up[p * c..p * c + c];
            if ups.iter().all(|&g| g == 0.0) {
                continue;
            }
            let wts = params.weights.pixel(row, col);
            let mods = params.modulation.pixel(row, col);
            let dxs = params.dx.pixel(row, col);
            let dys = params.dy.pixel(row, col);
            let zs = params.z.pixel(row, col);
            for n in 0..npts {
                let pn = p * npts + n;
                scratch.load(params, row, col, n);
                for (ch, &g) in ups.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..t1 {
                        let (v, gx, gy) = scratch.stencils[i].sample_with_grad(&frames[i], ch);
                        scratch.values[i] = v;
                        scratch.grad_x[i] = gx;
                        scratch.grad_y[i] = gy;
                    }
                    let support = SupportSet {
                        values: &scratch.values,
                        dx: &scratch.sdx,
                        dy: &scratch.sdy,
                    };
                    let s = interp::eval_unchecked(&kind, dxs[n], dys[n], zs[n], &support);
                    g_w[pn] += g * s * mods[n];
                    g_m[pn] += g * s * wts[n];
                    let gs = g * wts[n] * mods[n];
                    if gs == 0.0 {
                        continue;
                    }
                    interp::partials_unchecked(&kind, dxs[n], dys[n], zs[n], &support, &mut partials);
                    g_z[pn] += gs * partials.d_z;
                    g_dx[pn] += gs * partials.d_dx_n;
                    g_dy[pn] += gs * partials.d_dy_n;
                    for i in 0..t1 {
                        let gv = gs * partials.d_values[i];
                        let si = (p * t1 + i) * npts + n;
                        g_sdx[si] += gs * partials.d_dx[i] + gv * scratch.grad_x[i];
                        g_sdy[si] += gs * partials.d_dy[i] + gv * scratch.grad_y[i];
                        if gv != 0.0 {
                            let st = &scratch.stencils[i];
                            let gf = &mut g_frames[i];
                            for k in 0..4 {
                                gf[st.idx[k] * c + ch] += gv * st.w[k];
                            }
                        }
                    }
                }
            }
        }
    }

    let freedom = params.freedom();
    if !freedom.temporal {
        g_z.iter_mut().for_each(|v| *v = 0.0);
    }
    match freedom.offsets {
        OffsetFreedom::Independent => {}
        OffsetFreedom::Fixed => {
            for v in g_dx.iter_mut().chain(&mut g_dy).chain(&mut g_sdx).chain(&mut g_sdy) {
                *v = 0.0;
            }
        }
        OffsetFreedom::Shared => {
            for p in 0..h * w {
                for i in 0..t1 {
                    for n in 0..npts {
                        let si = (p * t1 + i) * npts + n;
                        g_dx[p * npts + n] += g_sdx[si];
                        g_dy[p * npts + n] += g_sdy[si];
                    }
                }
            }
            g_sdx.iter_mut().chain(&mut g_sdy).for_each(|v| *v = 0.0);
        }
    }

    let field = |d: usize, data: Vec<f64>| Field::new(h, w, d, data);
    Ok(GradBundle {
        weights: field(npts, g_w)?,
        dx: field(npts, g_dx)?,
        dy: field(npts, g_dy)?,
        z: field(npts, g_z)?,
        modulation: field(npts, g_m)?,
        sup_dx: field(t1 * npts, g_sdx)?,
        sup_dy: field(t1 * npts, g_sdy)?,
        frames: g_frames
            .into_iter()
            .map(|d| Frame::new(h, w, c, d))
            .collect::<Result<_>>()?,
    })
}
