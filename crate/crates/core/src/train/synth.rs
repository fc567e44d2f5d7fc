//! Synthetic moving-pattern sequences with exact area-coverage rendering.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameStack};

/// Motion law of the pattern centre, in pixels per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Motion {
    ConstantVelocity { vx: f64, vy: f64 },
    Quadratic { vx: f64, vy: f64, ax: f64, ay: f64 },
}

impl Motion {
    /// Displacement after `dt` time units.
    pub fn displacement(&self, dt: f64) -> (f64, f64) {
        match *self {
            Motion::ConstantVelocity { vx, vy } => (vx * dt, vy * dt),
            Motion::Quadratic { vx, vy, ax, ay } => (vx * dt + 0.5 * ax * dt * dt, vy * dt + 0.5 * ay * dt * dt),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Rectangle,
    Checker,
    GaussianBlob,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Rectangle, Pattern::Checker, Pattern::GaussianBlob];
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangle" => Ok(Pattern::Rectangle),
            "checker" => Ok(Pattern::Checker),
            "gaussian-blob" | "blob" => Ok(Pattern::GaussianBlob),
            other => Err(Error::Parse(format!("unknown pattern '{other}'"))),
        }
    }
}

/// One synthetic sequence. The pattern sits at its seeded anchor position
/// at `target_time` and moves along `motion` relative to that instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub motion: Motion,
    pub pattern: Pattern,
    pub frame_times: Vec<f64>,
    pub target_time: f64,
    /// Drives placement, size and intensities.
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Domain("synthetic frames must be non-empty".into()));
        }
        if self.frame_times.len() < 2 {
            return Err(Error::Arity("at least two frame times are required".into()));
        }
        let lo = self.frame_times.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.frame_times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo..=hi).contains(&self.target_time) {
            return Err(Error::Domain(format!(
                "target time {} outside [{lo}, {hi}]",
                self.target_time
            )));
        }
        Ok(())
    }
}

pub struct SynthSample {
    pub stack: FrameStack,
    pub target: Frame,
}

/// Seeded appearance of a pattern.
struct Appearance {
    cx: f64,
    cy: f64,
    background: f64,
    foreground: f64,
    /// Rectangle half-extents, checker cell size, or blob sigma.
    sx: f64,
    sy: f64,
}

impl Appearance {
    fn draw(spec: &SynthSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (h, w) = (spec.height as f64, spec.width as f64);
        let m = h.min(w);
        let cx = (w - 1.0) / 2.0 + rng.gen_range(-0.1..0.1) * w;
        let cy = (h - 1.0) / 2.0 + rng.gen_range(-0.1..0.1) * h;
        let lo = rng.gen_range(0.05..0.35);
        let hi = rng.gen_range(0.65..0.95);
        let (background, foreground) = if rng.gen_bool(0.5) { (lo, hi) } else { (hi, lo) };
        let (sx, sy) = match spec.pattern {
            Pattern::Rectangle => (rng.gen_range(0.12..0.28) * m, rng.gen_range(0.12..0.28) * m),
            Pattern::Checker => {
                let cell = rng.gen_range(3.0..8.0);
                (cell, cell)
            }
            Pattern::GaussianBlob => (rng.gen_range(0.06..0.14) * m, rng.gen_range(0.06..0.14) * m),
        };
        Self {
            cx,
            cy,
            background,
            foreground,
            sx,
            sy,
        }
    }
}

/// Length of `[a, b] ∩ [lo, hi]`.
fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    (b.min(hi) - a.max(lo)).max(0.0)
}

/// Antiderivative of the unit square wave that is `+1` on even cells of size `p`.
fn square_wave_integral(u: f64, p: f64) -> f64 {
    let v = u / p;
    let k = v.floor();
    let frac = v - k;
    if (k as i64).rem_euclid(2) == 0 {
        p * frac
    } else {
        p * (1.0 - frac)
    }
}

/// Integral of a unit-height Gaussian over `[a, b]`.
fn gaussian_integral(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    let s = sigma * std::f64::consts::SQRT_2;
    0.5 * sigma * (2.0 * std::f64::consts::PI).sqrt() * (libm::erf((b - mu) / s) - libm::erf((a - mu) / s))
}

/// Renders the pattern centred at `(cx, cy)`. Pixel `(r, c)` covers the unit
/// square around `(c, r)` and receives the mean intensity over that square.
fn render(spec: &SynthSpec, app: &Appearance, cx: f64, cy: f64) -> Frame {
    let (h, w) = (spec.height, spec.width);
    let contrast = app.foreground - app.background;
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        let (y0, y1) = (r as f64 - 0.5, r as f64 + 0.5);
        for c in 0..w {
            let (x0, x1) = (c as f64 - 0.5, c as f64 + 0.5);
            let coverage = match spec.pattern {
                Pattern::Rectangle => {
                    overlap(x0, x1, cx - app.sx, cx + app.sx) * overlap(y0, y1, cy - app.sy, cy + app.sy)
                }
                Pattern::Checker => {
                    let fx = square_wave_integral(x1 - cx, app.sx) - square_wave_integral(x0 - cx, app.sx);
                    let fy = square_wave_integral(y1 - cy, app.sy) - square_wave_integral(y0 - cy, app.sy);
                    0.5 + 0.5 * fx * fy
                }
                Pattern::GaussianBlob => {
                    gaussian_integral(x0, x1, cx, app.sx) * gaussian_integral(y0, y1, cy, app.sy)
                }
            };
            data.push(app.background + contrast * coverage);
        }
    }
    Frame::new(h, w, 1, data).expect("rendered buffer matches its shape")
}

/// Renders every frame of `spec` and the target frame.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthSample> {
    spec.validate()?;
    let app = Appearance::draw(spec);
    let at = |t: f64| {
        let (dx, dy) = spec.motion.displacement(t - spec.target_time);
        render(spec, &app, app.cx + dx, app.cy + dy)
    };
    let frames = spec.frame_times.iter().map(|&t| at(t)).collect();
    Ok(SynthSample {
        stack: FrameStack::new(frames, Some(spec.frame_times.clone()))?,
        target: at(spec.target_time),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionFamily {
    ConstantVelocity,
    Quadratic,
}

impl std::str::FromStr for MotionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" | "constant-velocity" => Ok(MotionFamily::ConstantVelocity),
            "quadratic" => Ok(MotionFamily::Quadratic),
            other => Err(Error::Parse(format!("unknown motion family '{other}'"))),
        }
    }
}

/// An endless, index-addressable stream of synthetic sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStream {
    pub height: usize,
    pub width: usize,
    pub motion: MotionFamily,
    /// Patterns to draw from uniformly.
    pub patterns: Vec<Pattern>,
    /// Velocity components are uniform in `[-max_speed, max_speed]`.
    pub max_speed: f64,
    /// Acceleration components (quadratic motion only) are uniform in `[-max_accel, max_accel]`.
    pub max_accel: f64,
    pub frame_times: Vec<f64>,
    pub target_time: f64,
    pub seed: u64,
}

impl SynthStream {
    /// Constant-velocity rectangles on 64x64 frames at times `0..=3`, target 1.5.
    pub fn new(seed: u64) -> Self {
        Self {
            height: 64,
            width: 64,
            motion: MotionFamily::ConstantVelocity,
            patterns: vec![Pattern::Rectangle],
            max_speed: 3.0,
            max_accel: 1.0,
            frame_times: vec![0.0, 1.0, 2.0, 3.0],
            target_time: 1.5,
            seed,
        }
    }

    /// The `index`-th sequence; independent of any other index.
    pub fn spec(&self, index: u64) -> SynthSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let mut sym = |m: f64| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        let (vx, vy) = (sym(self.max_speed), sym(self.max_speed));
        let motion = match self.motion {
            MotionFamily::ConstantVelocity => Motion::ConstantVelocity { vx, vy },
            MotionFamily::Quadratic => Motion::Quadratic {
                vx,
                vy,
                ax: sym(self.max_accel),
                ay: sym(self.max_accel),
            },
        };
        let pattern = if self.patterns.is_empty() {
            Pattern::Rectangle
        } else {
            self.patterns[rng.gen_range(0..self.patterns.len())]
        };
        SynthSpec {
            height: self.height,
            width: self.width,
            motion,
            pattern,
            frame_times: self.frame_times.clone(),
            target_time: self.target_time,
            seed: rng.gen(),
        }
    }

    pub fn sample(&self, index: u64) -> Result<SynthSample> {
        synth_generate(&self.spec(index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pattern: Pattern, motion: Motion) -> SynthSpec {
        SynthSpec {
            height: 32,
            width: 40,
            motion,
            pattern,
            frame_times: vec![0.0, 1.0, 2.0, 3.0],
            target_time: 1.5,
            seed: 11,
        }
    }

    /// Exact horizontal centre of a rendered rectangle, recovered from the
    /// coverage profile of one row: the first covered pixel `k` gives the left
    /// edge `k + 0.5 - p(k)`, and the total coverage gives the width.
    fn rectangle_center_x(f: &Frame, row: usize, app: &Appearance) -> f64 {
        let p: Vec<f64> = (0..f.width())
            .map(|c| (f.get(row, c, 0) - app.background) / (app.foreground - app.background))
            .collect();
        let k = p.iter().position(|&v| v > 1e-12).unwrap();
        let left = k as f64 + 0.5 - p[k];
        left + 0.5 * p.iter().sum::<f64>()
    }

    #[test]
    fn zero_velocity_is_static() {
        for p in Pattern::ALL {
            let s = synth_generate(&spec(p, Motion::ConstantVelocity { vx: 0.0, vy: 0.0 })).unwrap();
            for f in s.stack.frames() {
                assert_eq!(f, &s.target);
            }
        }
    }

    #[test]
    fn constant_velocity_midpoint() {
        let sp = spec(Pattern::Rectangle, Motion::ConstantVelocity { vx: 1.0, vy: 0.0 });
        let s = synth_generate(&sp).unwrap();
        let app = Appearance::draw(&sp);
        let row = app.cy.round() as usize;
        let c1 = rectangle_center_x(&s.stack.frames()[1], row, &app);
        let c2 = rectangle_center_x(&s.stack.frames()[2], row, &app);
        let ct = rectangle_center_x(&s.target, row, &app);
        assert!((ct - 0.5 * (c1 + c2)).abs() < 1e-9);
        assert!((c2 - c1 - 1.0).abs() < 1e-9);
        assert!((ct - app.cx).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        for p in Pattern::ALL {
            let sp = spec(p, Motion::Quadratic { vx: 0.7, vy: -1.3, ax: 0.2, ay: 0.1 });
            let a = synth_generate(&sp).unwrap();
            let b = synth_generate(&sp).unwrap();
            assert_eq!(a.stack, b.stack);
            assert_eq!(a.target, b.target);
        }
    }

    #[test]
    fn subpixel_shift_changes_pixels() {
        let a = synth_generate(&spec(Pattern::Rectangle, Motion::ConstantVelocity { vx: 0.0, vy: 0.0 })).unwrap();
        let b = synth_generate(&spec(Pattern::Rectangle, Motion::ConstantVelocity { vx: 0.25, vy: 0.0 })).unwrap();
        assert_ne!(a.stack.frames()[0], b.stack.frames()[0]);
    }

    #[test]
    fn rectangle_area_is_preserved() {
        let sp = spec(Pattern::Rectangle, Motion::ConstantVelocity { vx: 0.37, vy: 0.81 });
        let app = Appearance::draw(&sp);
        let s = synth_generate(&sp).unwrap();
        let area = 4.0 * app.sx * app.sy;
        for f in s.stack.frames() {
            let mass: f64 = f.data().iter().map(|v| (v - app.background) / (app.foreground - app.background)).sum();
            assert!((mass - area).abs() < 1e-9);
        }
    }

    #[test]
    fn square_wave_integral_is_continuous() {
        for k in -3..4 {
            let u = k as f64 * 2.5;
            let l = square_wave_integral(u - 1e-12, 2.5);
            let r = square_wave_integral(u + 1e-12, 2.5);
            assert!((l - r).abs() < 1e-9);
        }
        assert!((square_wave_integral(1.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((square_wave_integral(3.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn values_in_unit_range() {
        let stream = SynthStream {
            patterns: Pattern::ALL.to_vec(),
            motion: MotionFamily::Quadratic,
            ..SynthStream::new(5)
        };
        for i in 0..6 {
            let s = stream.sample(i).unwrap();
            assert!(s.target.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn stream_is_index_addressable() {
        let st = SynthStream::new(3);
        assert_eq!(st.spec(17), st.spec(17));
        assert_ne!(st.spec(17), st.spec(18));
        assert_ne!(st.spec(0), SynthStream::new(4).spec(0));
    }

    #[test]
    fn target_outside_times_rejected() {
        let mut sp = spec(Pattern::Checker, Motion::ConstantVelocity { vx: 1.0, vy: 1.0 });
        sp.target_time = 3.5;
        assert!(synth_generate(&sp).is_err());
    }
}
