//! A small convolutional network that maps generation frames to operator parameters.
//!
//! All hidden layers are 3x3, stride 1, zero "same" padding, followed by
//! `tanh`. The last layer is linear and emits the [`ParamLayout`] channels,
//! which a fixed head then squashes into the admissible parameter ranges.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::FrameStack;
use crate::io::{read_vector, write_vector};
use crate::gdconv::{GDConvParams, GradBundle, ParamLayout};

/// Overshoot margin of the squashing heads for `z` and modulation: the
/// sigmoid is stretched slightly past the admissible range and then clamped,
/// so both ends are reachable and the initial values sit on a finite bias.
const HEAD_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorCfg {
    /// Number of generation frames.
    pub generation_frames: usize,
    /// Channels per frame.
    pub frame_channels: usize,
    pub hidden: usize,
    /// Total convolution layers, including the output layer.
    pub layers: usize,
    pub n_points: usize,
    pub t_plus_1: usize,
}

impl PredictorCfg {
    pub fn new(generation_frames: usize, n_points: usize, t_plus_1: usize) -> Self {
        Self {
            generation_frames,
            frame_channels: 1,
            hidden: 32,
            layers: 4,
            n_points,
            t_plus_1,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.generation_frames * self.frame_channels
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.n_points, self.t_plus_1)
    }

    /// `(in, out)` channel counts per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let cin = if l == 0 { self.in_channels() } else { self.hidden };
                let cout = if l + 1 == self.layers { self.layout().channels() } else { self.hidden };
                (cin, cout)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| o * i * 9 + o).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.generation_frames == 0 || self.frame_channels == 0 {
            return Err(Error::Domain("predictor dimensions must be positive".into()));
        }
        if self.n_points == 0 || self.t_plus_1 < 2 {
            return Err(Error::Domain("predictor needs N >= 1 and T+1 >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyPredictor {
    cfg: PredictorCfg,
    params: Vec<f64>,
}

/// Activations kept from the forward pass for backpropagation.
pub struct PredictorTape {
    height: usize,
    width: usize,
    /// im2col matrix of each layer's input.
    cols: Vec<Vec<f64>>,
    /// tanh outputs of the hidden layers.
    acts: Vec<Vec<f64>>,
    /// Raw output planes of the last layer.
    raw: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Head for a quantity in `[lo, hi]` whose zero-input value is `start` (either end).
#[derive(Clone, Copy)]
struct SquashHead {
    lo: f64,
    span: f64,
    bias: f64,
    offset: f64,
}

impl SquashHead {
    fn new(lo: f64, hi: f64, start_at_hi: bool) -> Self {
        let stretch = 1.0 + 2.0 * HEAD_MARGIN;
        let p0 = if start_at_hi { (1.0 + HEAD_MARGIN) / stretch } else { HEAD_MARGIN / stretch };
        let bias = logit(p0);
        Self {
            lo,
            span: hi - lo,
            bias,
            offset: if start_at_hi { 1.0 } else { 0.0 },
        }
    }

    /// Unit-interval coordinate before clamping.
    fn unit(&self, raw: f64) -> f64 {
        let stretch = 1.0 + 2.0 * HEAD_MARGIN;
        self.offset + stretch * (sigmoid(raw + self.bias) - sigmoid(self.bias))
    }

    fn value(&self, raw: f64) -> f64 {
        self.lo + self.span * self.unit(raw).clamp(0.0, 1.0)
    }

    fn deriv(&self, raw: f64) -> f64 {
        let u = self.unit(raw);
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let s = sigmoid(raw + self.bias);
        self.span * (1.0 + 2.0 * HEAD_MARGIN) * s * (1.0 - s)
    }
}

/// `out[Cout, HW] = w[Cout, K] * cols[K, HW] + b`.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], beta: f64) {
    // Row-major strides; a transposed operand swaps them.
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn im2col(input: &[f64], cin: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut cols = vec![0.0; cin * 9 * hw];
    for ci in 0..cin {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 9) + ky * 3 + kx) * hw..((ci * 9) + ky * 3 + kx + 1) * hw];
                for r in 0..h {
                    let sr = r as isize + ky as isize - 1;
                    if sr < 0 || sr >= h as isize {
                        continue;
                    }
                    let sr = sr as usize;
                    for c in 0..w {
                        let sc = c as isize + kx as isize - 1;
                        if sc >= 0 && sc < w as isize {
                            row[r * w + c] = plane[sr * w + sc as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], cin: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; cin * hw];
    for ci in 0..cin {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ci * 9) + ky * 3 + kx) * hw..((ci * 9) + ky * 3 + kx + 1) * hw];
                for r in 0..h {
                    let sr = r as isize + ky as isize - 1;
                    if sr < 0 || sr >= h as isize {
                        continue;
                    }
                    let sr = sr as usize;
                    for c in 0..w {
                        let sc = c as isize + kx as isize - 1;
                        if sc >= 0 && sc < w as isize {
                            out[ci * hw + sr * w + sc as usize] += row[r * w + c];
                        }
                    }
                }
            }
        }
    }
    out
}

impl ToyPredictor {
    /// All parameters zero; the output is [`GDConvParams::init`] for any input.
    pub fn zeros(cfg: PredictorCfg) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            params: vec![0.0; cfg.param_count()],
            cfg,
        })
    }

    /// Xavier-uniform hidden layers and a zero output layer, so the initial
    /// output is still [`GDConvParams::init`] while hidden features are live.
    pub fn new(cfg: PredictorCfg, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        let dims = cfg.layer_dims();
        for (l, &(cin, cout)) in dims.iter().enumerate() {
            let nw = cout * cin * 9;
            if l + 1 < dims.len() {
                let bound = (6.0 / ((cin + cout) * 9) as f64).sqrt();
                for v in &mut p.params[offset..offset + nw] {
                    *v = rng.gen_range(-bound..bound);
                }
            }
            offset += nw + cout;
        }
        Ok(p)
    }

    pub fn from_params(cfg: PredictorCfg, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if params.len() != cfg.param_count() {
            return Err(Error::Size {
                expected: cfg.param_count(),
                actual: params.len(),
            });
        }
        Ok(Self { cfg, params })
    }

    pub fn cfg(&self) -> &PredictorCfg {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn input_planes(&self, frames: &FrameStack) -> Result<Vec<f64>> {
        let (h, w, c) = frames.shape();
        if frames.len() != self.cfg.generation_frames || c != self.cfg.frame_channels {
            return Err(Error::Shape(format!(
                "predictor expects {} frames of {} channels, got {} of {c}",
                self.cfg.generation_frames,
                self.cfg.frame_channels,
                frames.len()
            )));
        }
        let hw = h * w;
        let mut x = vec![0.0; frames.len() * c * hw];
        for (f, frame) in frames.frames().iter().enumerate() {
            for p in 0..hw {
                for ch in 0..c {
                    x[(f * c + ch) * hw + p] = frame.data()[p * c + ch] - 0.5;
                }
            }
        }
        Ok(x)
    }

    /// Runs the network and keeps what backpropagation needs.
    pub fn forward_tape(&self, frames: &FrameStack) -> Result<PredictorTape> {
        let (h, w, _) = frames.shape();
        let hw = h * w;
        let mut x = self.input_planes(frames)?;
        let dims = self.cfg.layer_dims();
        let mut cols_all = Vec::with_capacity(dims.len());
        let mut acts = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for (l, &(cin, cout)) in dims.iter().enumerate() {
            let k = cin * 9;
            let wts = &self.params[offset..offset + cout * k];
            let bias = &self.params[offset + cout * k..offset + cout * k + cout];
            offset += cout * k + cout;
            let cols = im2col(&x, cin, h, w);
            let mut y = vec![0.0; cout * hw];
            for (o, b) in bias.iter().enumerate() {
                y[o * hw..(o + 1) * hw].fill(*b);
            }
            gemm(cout, k, hw, wts, false, &cols, false, &mut y, 1.0);
            cols_all.push(cols);
            if l + 1 < dims.len() {
                y.iter_mut().for_each(|v| *v = v.tanh());
                acts.push(y.clone());
                x = y;
            } else {
                x = y;
            }
        }
        Ok(PredictorTape {
            height: h,
            width: w,
            cols: cols_all,
            acts,
            raw: x,
        })
    }

    /// Maps raw output planes to constrained parameters.
    pub fn params_from_tape(&self, tape: &PredictorTape) -> Result<GDConvParams> {
        let layout = self.cfg.layout();
        let hw = tape.height * tape.width;
        let n = layout.n_points;
        let t_max = (layout.t_plus_1 - 1) as f64;
        let z_head = SquashHead::new(0.0, t_max, false);
        let m_head = SquashHead::new(0.0, 1.0, true);
        let mut planes = tape.raw.clone();
        for (base, head) in [(layout.z(), z_head), (layout.modulation(), m_head)] {
            for v in &mut planes[base * hw..(base + n) * hw] {
                *v = head.value(*v);
            }
        }
        let winit = 1.0 / n as f64;
        for v in &mut planes[layout.weights() * hw..(layout.weights() + n) * hw] {
            *v += winit;
        }
        GDConvParams::from_planes(tape.height, tape.width, layout, &planes)
    }

    pub fn predictor_forward(&self, generation_frames: &FrameStack) -> Result<GDConvParams> {
        let tape = self.forward_tape(generation_frames)?;
        self.params_from_tape(&tape)
    }

    /// Backpropagates operator-parameter gradients to the network parameters.
    pub fn backward(&self, tape: &PredictorTape, grads: &GradBundle) -> Result<Vec<f64>> {
        let layout = self.cfg.layout();
        let (h, w) = (tape.height, tape.width);
        let hw = h * w;
        if grads.weights.dims() != (h, w, layout.n_points) {
            return Err(Error::Shape("gradient bundle does not match predictor output".into()));
        }
        let mut g = grads.to_planes(layout);
        let n = layout.n_points;
        let t_max = (layout.t_plus_1 - 1) as f64;
        for (base, head) in [
            (layout.z(), SquashHead::new(0.0, t_max, false)),
            (layout.modulation(), SquashHead::new(0.0, 1.0, true)),
        ] {
            for i in base * hw..(base + n) * hw {
                g[i] *= head.deriv(tape.raw[i]);
            }
        }

        let dims = self.cfg.layer_dims();
        let mut grad = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(dims.len());
        let mut off = 0;
        for &(cin, cout) in &dims {
            offsets.push(off);
            off += cout * cin * 9 + cout;
        }
        for l in (0..dims.len()).rev() {
            let (cin, cout) = dims[l];
            let k = cin * 9;
            let o = offsets[l];
            if l + 1 < dims.len() {
                let a = &tape.acts[l];
                g.iter_mut().zip(a).for_each(|(gv, av)| *gv *= 1.0 - av * av);
            }
            let (gw, rest) = grad[o..o + cout * k + cout].split_at_mut(cout * k);
            gemm(cout, hw, k, &g, false, &tape.cols[l], true, gw, 0.0);
            for (ob, gb) in rest.iter_mut().enumerate() {
                *gb = g[ob * hw..(ob + 1) * hw].iter().sum();
            }
            if l > 0 {
                let wts = &self.params[o..o + cout * k];
                let mut dcols = vec![0.0; k * hw];
                gemm(k, cout, hw, wts, true, &g, false, &mut dcols, 0.0);
                g = col2im(&dcols, cin, h, w);
            }
        }
        Ok(grad)
    }
}

/// Architecture manifest written next to the weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointManifest {
    architecture: PredictorCfg,
    param_count: usize,
    weights: String,
}

const CHECKPOINT_MANIFEST: &str = "predictor.json";
const CHECKPOINT_WEIGHTS: &str = "predictor.gdcf";

/// Writes `predictor.json` and `predictor.gdcf` into `dir`.
///
/// Weights are stored as 32-bit floats, so a reloaded predictor matches the
/// original to single precision.
pub fn save_checkpoint(dir: impl AsRef<Path>, predictor: &ToyPredictor) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_vector(dir.join(CHECKPOINT_WEIGHTS), predictor.params())?;
    let manifest = CheckpointManifest {
        architecture: predictor.cfg,
        param_count: predictor.params.len(),
        weights: CHECKPOINT_WEIGHTS.into(),
    };
    std::fs::write(dir.join(CHECKPOINT_MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a checkpoint from its directory or from the path of its manifest.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ToyPredictor> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() { path.join(CHECKPOINT_MANIFEST) } else { path.to_path_buf() };
    let manifest: CheckpointManifest = serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let params = read_vector(dir.join(&manifest.weights))?;
    if params.len() != manifest.param_count {
        return Err(Error::Size {
            expected: manifest.param_count,
            actual: params.len(),
        });
    }
    ToyPredictor::from_params(manifest.architecture, params)
}
