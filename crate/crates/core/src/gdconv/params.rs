use crate::error::{Error, Result};
use crate::frame::{Field, Frame};

/// How much of the sampling geometry is adaptive.
///
/// Frozen groups are held at their constructed values and receive exactly
/// zero gradient from the backward pass. Tied groups (`Shared`) route the
/// support-offset gradients into the sampling offset they are tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OffsetFreedom {
    /// Sampling and support offsets fixed.
    Fixed,
    /// One adaptive offset per sampling point, copied to all its supports.
    Shared,
    /// Every support point carries its own adaptive offset.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Freedom {
    pub offsets: OffsetFreedom,
    /// Whether `z` is adaptive.
    pub temporal: bool,
}

impl Freedom {
    pub const FULL: Freedom = Freedom {
        offsets: OffsetFreedom::Independent,
        temporal: true,
    };
}

impl Default for Freedom {
    fn default() -> Self {
        Self::FULL
    }
}

/// The five spatio-temporal freedom variants of the ablation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FreedomVariant {
    /// (a) fixed grid offsets shared by all supports, `z = t`.
    FixedGrid,
    /// (b) shared adaptive offsets, `z = t`.
    SharedOffsets,
    /// (c) shared adaptive offsets, adaptive `z`.
    SharedOffsetsTemporal,
    /// (d) independent support offsets, `z = t`.
    FreeOffsets,
    /// (e) everything adaptive.
    Full,
}

impl FreedomVariant {
    pub const ALL: [FreedomVariant; 5] = [
        FreedomVariant::FixedGrid,
        FreedomVariant::SharedOffsets,
        FreedomVariant::SharedOffsetsTemporal,
        FreedomVariant::FreeOffsets,
        FreedomVariant::Full,
    ];

    pub fn freedom(self) -> Freedom {
        use OffsetFreedom::*;
        let (offsets, temporal) = match self {
            FreedomVariant::FixedGrid => (Fixed, false),
            FreedomVariant::SharedOffsets => (Shared, false),
            FreedomVariant::SharedOffsetsTemporal => (Shared, true),
            FreedomVariant::FreeOffsets => (Independent, false),
            FreedomVariant::Full => (Independent, true),
        };
        Freedom { offsets, temporal }
    }

    pub fn letter(self) -> char {
        match self {
            FreedomVariant::FixedGrid => 'a',
            FreedomVariant::SharedOffsets => 'b',
            FreedomVariant::SharedOffsetsTemporal => 'c',
            FreedomVariant::FreeOffsets => 'd',
            FreedomVariant::Full => 'e',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.letter() == c)
    }
}

/// Channel layout of a stacked parameter tensor, as produced by a predictor:
/// support offsets `2(T+1)N`, then sampling offsets and `z` (`3N`), then
/// modulation (`N`), then weights (`N`).
///
/// Within the support block the index is `i * N + n` (all `x` first, then all `y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_points: usize,
    pub t_plus_1: usize,
}

impl ParamLayout {
    pub fn new(n_points: usize, t_plus_1: usize) -> Self {
        Self { n_points, t_plus_1 }
    }

    pub fn channels(&self) -> usize {
        let n = self.n_points;
        2 * self.t_plus_1 * n + 3 * n + n + n
    }

    pub fn sup_dx(&self) -> usize {
        0
    }

    pub fn sup_dy(&self) -> usize {
        self.t_plus_1 * self.n_points
    }

    pub fn dx(&self) -> usize {
        2 * self.t_plus_1 * self.n_points
    }

    pub fn dy(&self) -> usize {
        self.dx() + self.n_points
    }

    pub fn z(&self) -> usize {
        self.dx() + 2 * self.n_points
    }

    pub fn modulation(&self) -> usize {
        self.dx() + 3 * self.n_points
    }

    pub fn weights(&self) -> usize {
        self.dx() + 4 * self.n_points
    }
}

/// Per-pixel adaptive parameters of the operator.
///
/// Per-point fields (`weights`, `dx`, `dy`, `z`, `modulation`) have depth `N`;
/// support-offset fields have depth `(T+1) N` indexed `i * N + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GDConvParams {
    n_points: usize,
    t_plus_1: usize,
    pub(crate) weights: Field,
    pub(crate) dx: Field,
    pub(crate) dy: Field,
    pub(crate) z: Field,
    pub(crate) modulation: Field,
    pub(crate) sup_dx: Field,
    pub(crate) sup_dy: Field,
    pub(crate) freedom: Freedom,
}

impl GDConvParams {
    /// Assembles parameters from their fields. `z` is clamped to `[0, T]` and
    /// `modulation` to `[0, 1]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        weights: Field,
        dx: Field,
        dy: Field,
        z: Field,
        modulation: Field,
        sup_dx: Field,
        sup_dy: Field,
    ) -> Result<Self> {
        let (h, w, n) = weights.dims();
        for (name, f) in [("dx", &dx), ("dy", &dy), ("z", &z), ("modulation", &modulation)] {
            if f.dims() != (h, w, n) {
                return Err(Error::Shape(format!(
                    "{name} field {:?} does not match weights {:?}",
                    f.dims(),
                    (h, w, n)
                )));
            }
        }
        if sup_dx.dims() != sup_dy.dims() || sup_dx.height() != h || sup_dx.width() != w {
            return Err(Error::Shape(format!(
                "support offset fields {:?}/{:?} do not match {h}x{w}",
                sup_dx.dims(),
                sup_dy.dims()
            )));
        }
        if sup_dx.depth() % n != 0 || sup_dx.depth() / n < 2 {
            return Err(Error::Arity(format!(
                "support depth {} is not (T+1)*N with N = {n} and T >= 1",
                sup_dx.depth()
            )));
        }
        let t_plus_1 = sup_dx.depth() / n;
        let t_max = (t_plus_1 - 1) as f64;
        Ok(Self {
            n_points: n,
            t_plus_1,
            weights,
            dx,
            dy,
            z: z.map(|v| v.clamp(0.0, t_max))?,
            modulation: modulation.map(|v| v.clamp(0.0, 1.0))?,
            sup_dx,
            sup_dy,
            freedom: Freedom::FULL,
        })
    }

    /// Initial parameters: zero offsets, `z = 0`, unit modulation, weights `1/N`.
    pub fn init(height: usize, width: usize, n_points: usize, t_max: usize) -> Result<Self> {
        if height == 0 || width == 0 || n_points == 0 || t_max == 0 {
            return Err(Error::Domain("height, width, N and T must be positive".into()));
        }
        let per_point = |v: f64| Field::filled(height, width, n_points, v);
        let support = || Field::zeros(height, width, (t_max + 1) * n_points);
        Self::new(
            per_point(1.0 / n_points as f64),
            per_point(0.0),
            per_point(0.0),
            per_point(0.0),
            per_point(1.0),
            support(),
            support(),
        )
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn t_plus_1(&self) -> usize {
        self.t_plus_1
    }

    pub fn t_max(&self) -> usize {
        self.t_plus_1 - 1
    }

    pub fn height(&self) -> usize {
        self.weights.height()
    }

    pub fn width(&self) -> usize {
        self.weights.width()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.n_points, self.t_plus_1)
    }

    pub fn weights(&self) -> &Field {
        &self.weights
    }

    pub fn dx(&self) -> &Field {
        &self.dx
    }

    pub fn dy(&self) -> &Field {
        &self.dy
    }

    pub fn z(&self) -> &Field {
        &self.z
    }

    pub fn modulation(&self) -> &Field {
        &self.modulation
    }

    pub fn sup_dx(&self) -> &Field {
        &self.sup_dx
    }

    pub fn sup_dy(&self) -> &Field {
        &self.sup_dy
    }

    pub fn freedom(&self) -> Freedom {
        self.freedom
    }

    /// Field by name; used by serialization and gradient checks.
    pub fn field(&self, id: ParamField) -> &Field {
        match id {
            ParamField::Weights => &self.weights,
            ParamField::Dx => &self.dx,
            ParamField::Dy => &self.dy,
            ParamField::Z => &self.z,
            ParamField::Modulation => &self.modulation,
            ParamField::SupDx => &self.sup_dx,
            ParamField::SupDy => &self.sup_dy,
        }
    }

    /// Replaces one field, re-applying range clamps and freedom ties.
    pub fn with_field(&self, id: ParamField, field: Field) -> Result<Self> {
        if field.dims() != self.field(id).dims() {
            return Err(Error::Shape(format!(
                "{} field {:?} does not match {:?}",
                id.name(),
                field.dims(),
                self.field(id).dims()
            )));
        }
        let mut out = self.clone();
        let t_max = self.t_max() as f64;
        match id {
            ParamField::Weights => out.weights = field,
            ParamField::Dx => out.dx = field,
            ParamField::Dy => out.dy = field,
            ParamField::Z => out.z = field.map(|v| v.clamp(0.0, t_max))?,
            ParamField::Modulation => out.modulation = field.map(|v| v.clamp(0.0, 1.0))?,
            ParamField::SupDx => out.sup_dx = field,
            ParamField::SupDy => out.sup_dy = field,
        }
        out.tie_supports();
        Ok(out)
    }

    /// Applies a freedom variant: freezes `z` at `target_z` unless temporal
    /// freedom is kept, snaps offsets to a fixed grid for variant (a), and ties
    /// support offsets to the sampling offsets for shared variants.
    pub fn with_freedom(mut self, variant: FreedomVariant, target_z: f64) -> Result<Self> {
        let t_max = self.t_max() as f64;
        if !(0.0..=t_max).contains(&target_z) {
            return Err(Error::Domain(format!("target z {target_z} outside [0, {t_max}]")));
        }
        let freedom = variant.freedom();
        if !freedom.temporal {
            self.z = Field::filled(self.height(), self.width(), self.n_points, target_z);
        }
        if freedom.offsets == OffsetFreedom::Fixed {
            let grid = grid_offsets(self.n_points);
            let (h, w, n) = self.dx.dims();
            self.dx = Field::from_fn(h, w, n, |_, _, k| grid[k].0)?;
            self.dy = Field::from_fn(h, w, n, |_, _, k| grid[k].1)?;
        }
        self.freedom = freedom;
        self.tie_supports();
        Ok(self)
    }

    pub(crate) fn set_freedom(&mut self, freedom: Freedom) {
        self.freedom = freedom;
        self.tie_supports();
    }

    /// For fixed and shared offsets, copies each sampling offset to all of its supports.
    fn tie_supports(&mut self) {
        if self.freedom.offsets == OffsetFreedom::Independent {
            return;
        }
        let n = self.n_points;
        let t1 = self.t_plus_1;
        let px = self.height() * self.width();
        for p in 0..px {
            for k in 0..n {
                let ox = self.dx.data()[p * n + k];
                let oy = self.dy.data()[p * n + k];
                for i in 0..t1 {
                    self.sup_dx.data_mut()[p * t1 * n + i * n + k] = ox;
                    self.sup_dy.data_mut()[p * t1 * n + i * n + k] = oy;
                }
            }
        }
    }

    /// Checks that these parameters can drive a stack of the given shape.
    pub fn check_against(&self, height: usize, width: usize, stack_len: usize) -> Result<()> {
        if self.height() != height || self.width() != width {
            return Err(Error::Shape(format!(
                "params are {}x{}, frames are {height}x{width}",
                self.height(),
                self.width()
            )));
        }
        if self.t_plus_1 != stack_len {
            return Err(Error::Shape(format!(
                "params expect {} frames, stack has {stack_len}",
                self.t_plus_1
            )));
        }
        Ok(())
    }

    /// Packs all fields into channel-major planes following [`ParamLayout`].
    pub fn to_planes(&self) -> Vec<f64> {
        let layout = self.layout();
        let px = self.height() * self.width();
        let mut out = vec![0.0; layout.channels() * px];
        let mut put = |base: usize, field: &Field| {
            let d = field.depth();
            for p in 0..px {
                for k in 0..d {
                    out[(base + k) * px + p] = field.data()[p * d + k];
                }
            }
        };
        put(layout.sup_dx(), &self.sup_dx);
        put(layout.sup_dy(), &self.sup_dy);
        put(layout.dx(), &self.dx);
        put(layout.dy(), &self.dy);
        put(layout.z(), &self.z);
        put(layout.modulation(), &self.modulation);
        put(layout.weights(), &self.weights);
        out
    }

    /// Inverse of [`GDConvParams::to_planes`].
    pub fn from_planes(height: usize, width: usize, layout: ParamLayout, planes: &[f64]) -> Result<Self> {
        let px = height * width;
        if planes.len() != layout.channels() * px {
            return Err(Error::Size {
                expected: layout.channels() * px,
                actual: planes.len(),
            });
        }
        let take = |base: usize, depth: usize| {
            Field::from_fn(height, width, depth, |r, c, k| planes[(base + k) * px + r * width + c])
        };
        let n = layout.n_points;
        let t1n = layout.t_plus_1 * n;
        Self::new(
            take(layout.weights(), n)?,
            take(layout.dx(), n)?,
            take(layout.dy(), n)?,
            take(layout.z(), n)?,
            take(layout.modulation(), n)?,
            take(layout.sup_dx(), t1n)?,
            take(layout.sup_dy(), t1n)?,
        )
    }
}

/// Names of the parameter fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamField {
    Weights,
    Dx,
    Dy,
    Z,
    Modulation,
    SupDx,
    SupDy,
}

impl ParamField {
    pub const ALL: [ParamField; 7] = [
        ParamField::Weights,
        ParamField::Dx,
        ParamField::Dy,
        ParamField::Z,
        ParamField::Modulation,
        ParamField::SupDx,
        ParamField::SupDy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamField::Weights => "weights",
            ParamField::Dx => "dx",
            ParamField::Dy => "dy",
            ParamField::Z => "z",
            ParamField::Modulation => "mod",
            ParamField::SupDx => "sup_dx",
            ParamField::SupDy => "sup_dy",
        }
    }
}

/// Centered integer offsets for `n` points: the `n` positions of the smallest
/// odd square grid closest to the center, in row-major order. For `n = k^2`
/// with odd `k` this is the full `k x k` grid.
pub fn grid_offsets(n: usize) -> Vec<(f64, f64)> {
    let mut k = 1usize;
    while k * k < n {
        k += 2;
    }
    let r = (k / 2) as i64;
    let mut cells: Vec<(i64, i64)> = (-r..=r).flat_map(|y| (-r..=r).map(move |x| (x, y))).collect();
    cells.sort_by_key(|&(x, y)| (x * x + y * y, y, x));
    cells.truncate(n);
    cells.sort_by_key(|&(x, y)| (y, x));
    cells.into_iter().map(|(x, y)| (x as f64, y as f64)).collect()
}

/// Gradients of a scalar loss with respect to every parameter field and source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub weights: Field,
    pub dx: Field,
    pub dy: Field,
    pub z: Field,
    pub modulation: Field,
    pub sup_dx: Field,
    pub sup_dy: Field,
    pub frames: Vec<Frame>,
}

impl GradBundle {
    pub fn field(&self, id: ParamField) -> &Field {
        match id {
            ParamField::Weights => &self.weights,
            ParamField::Dx => &self.dx,
            ParamField::Dy => &self.dy,
            ParamField::Z => &self.z,
            ParamField::Modulation => &self.modulation,
            ParamField::SupDx => &self.sup_dx,
            ParamField::SupDy => &self.sup_dy,
        }
    }

    /// Gradient packed in the channel-major [`ParamLayout`] order.
    pub fn to_planes(&self, layout: ParamLayout) -> Vec<f64> {
        let (h, w, _) = self.weights.dims();
        let px = h * w;
        let mut out = vec![0.0; layout.channels() * px];
        let mut put = |base: usize, field: &Field| {
            let d = field.depth();
            for p in 0..px {
                for k in 0..d {
                    out[(base + k) * px + p] = field.data()[p * d + k];
                }
            }
        };
        put(layout.sup_dx(), &self.sup_dx);
        put(layout.sup_dy(), &self.sup_dy);
        put(layout.dx(), &self.dx);
        put(layout.dy(), &self.dy);
        put(layout.z(), &self.z);
        put(layout.modulation(), &self.modulation);
        put(layout.weights(), &self.weights);
        out
    }
}
