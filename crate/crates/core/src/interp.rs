//! Space-time interpolation of a sampling point from its support points.
//!
//! A sampling point sits at fractional temporal index `z` in `[0, T]` with
//! spatial offset `(dx_n, dy_n)`. Each of its `T+1` support points is pinned
//! to integer time `i`, carries its own offset `(dx_i, dy_i)` and a value
//! `s_i` already read from source frame `i`. The interpolants below combine
//! those into one value and expose exact partial derivatives for training.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which interpolation function combines the support values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpVariant {
    /// Tent weights over the two temporally adjacent supports.
    Linear,
    /// Inverse squared distance in normalized (x, y, t).
    #[serde(rename = "inv3d")]
    InvDist3D,
    /// Inverse squared distance along t only.
    #[serde(rename = "inv1d")]
    InvDist1D,
    /// Degree-T polynomial through `(i, s_i)`.
    Poly,
    /// `Poly` clamped to the range of the support values.
    PolyClamped,
}

impl InterpVariant {
    pub const ALL: [InterpVariant; 5] = [
        InterpVariant::Linear,
        InterpVariant::InvDist3D,
        InterpVariant::InvDist1D,
        InterpVariant::Poly,
        InterpVariant::PolyClamped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterpVariant::Linear => "linear",
            InterpVariant::InvDist3D => "inv3d",
            InterpVariant::InvDist1D => "inv1d",
            InterpVariant::Poly => "poly",
            InterpVariant::PolyClamped => "poly-clamped",
        }
    }

    /// True for every variant whose output is a linear function of the support values.
    pub fn is_linear_in_values(self) -> bool {
        !matches!(self, InterpVariant::PolyClamped)
    }
}

impl fmt::Display for InterpVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InterpVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown interpolation {s:?} (expected linear, inv3d, inv1d, poly or poly-clamped)"
                ))
            })
    }
}

/// Interpolation selector plus its numeric configuration.
///
/// The normalizers divide the offset differences before inverse-distance
/// weighting: `norm_h` scales the horizontal difference, `norm_w` the
/// vertical one and `norm_t` the temporal one. `None` means "use the
/// default": the frame height, width and `T` when the operator resolves the
/// kind, or 1, 1 and `T` when the interpolant is called directly.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InterpKind {
    pub variant: InterpVariant,
    pub epsilon_dist: f64,
    pub norm_h: Option<f64>,
    pub norm_w: Option<f64>,
    pub norm_t: Option<f64>,
}

pub const DEFAULT_EPSILON_DIST: f64 = 1e-8;

impl InterpKind {
    pub fn new(variant: InterpVariant) -> Self {
        Self {
            variant,
            epsilon_dist: DEFAULT_EPSILON_DIST,
            norm_h: None,
            norm_w: None,
            norm_t: None,
        }
    }

    pub fn linear() -> Self {
        Self::new(InterpVariant::Linear)
    }

    pub fn inv3d() -> Self {
        Self::new(InterpVariant::InvDist3D)
    }

    pub fn inv1d() -> Self {
        Self::new(InterpVariant::InvDist1D)
    }

    pub fn poly() -> Self {
        Self::new(InterpVariant::Poly)
    }

    pub fn poly_clamped() -> Self {
        Self::new(InterpVariant::PolyClamped)
    }

    pub fn with_epsilon(mut self, epsilon_dist: f64) -> Self {
        self.epsilon_dist = epsilon_dist;
        self
    }

    pub fn with_norms(mut self, norm_h: f64, norm_w: f64, norm_t: f64) -> Self {
        self.norm_h = Some(norm_h);
        self.norm_w = Some(norm_w);
        self.norm_t = Some(norm_t);
        self
    }

    /// Fills unset normalizers from the frame geometry.
    pub fn resolved(mut self, height: usize, width: usize, t_max: usize) -> Self {
        self.norm_h.get_or_insert(height as f64);
        self.norm_w.get_or_insert(width as f64);
        self.norm_t.get_or_insert(t_max as f64);
        self
    }

    pub fn validate(&self) -> Result<()> {
        // Zero is accepted: it selects the exact-hit branch of the
        // inverse-distance weights.
        if !(self.epsilon_dist >= 0.0 && self.epsilon_dist.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon_dist must be finite and non-negative, got {}",
                self.epsilon_dist
            )));
        }
        for (name, n) in [("norm_h", self.norm_h), ("norm_w", self.norm_w), ("norm_t", self.norm_t)] {
            if let Some(v) = n {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn norms(&self, t_max: usize) -> (f64, f64, f64) {
        (
            self.norm_h.unwrap_or(1.0),
            self.norm_w.unwrap_or(1.0),
            self.norm_t.unwrap_or(t_max as f64),
        )
    }
}

impl fmt::Display for InterpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.variant.as_str())
    }
}

impl FromStr for InterpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(InterpKind::new(s.parse()?))
    }
}

/// Values and spatial offsets of the `T+1` support points of one sampling point.
#[derive(Debug, Clone, Copy)]
pub struct SupportSet<'a> {
    pub values: &'a [f64],
    pub dx: &'a [f64],
    pub dy: &'a [f64],
}

impl<'a> SupportSet<'a> {
    pub fn new(values: &'a [f64], dx: &'a [f64], dy: &'a [f64]) -> Result<Self> {
        let s = Self { values, dx, dy };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n < 2 {
            return Err(Error::Arity(format!("need at least 2 support points, got {n}")));
        }
        if self.dx.len() != n || self.dy.len() != n {
            return Err(Error::Arity(format!(
                "support lists disagree: {} values, {} dx, {} dy",
                n,
                self.dx.len(),
                self.dy.len()
            )));
        }
        if self
            .values
            .iter()
            .chain(self.dx)
            .chain(self.dy)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("support set contains non-finite values".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn t_max(&self) -> usize {
        self.values.len() - 1
    }
}

/// Exact partial derivatives of an interpolated value.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpPartials {
    pub d_z: f64,
    /// With respect to the sampling point's own offset (non-zero only for `InvDist3D`).
    pub d_dx_n: f64,
    pub d_dy_n: f64,
    pub d_values: Vec<f64>,
    pub d_dx: Vec<f64>,
    pub d_dy: Vec<f64>,
}

impl InterpPartials {
    pub fn zeros(len: usize) -> Self {
        Self {
            d_z: 0.0,
            d_dx_n: 0.0,
            d_dy_n: 0.0,
            d_values: vec![0.0; len],
            d_dx: vec![0.0; len],
            d_dy: vec![0.0; len],
        }
    }

    fn reset(&mut self, len: usize) {
        self.d_z = 0.0;
        self.d_dx_n = 0.0;
        self.d_dy_n = 0.0;
        for v in [&mut self.d_values, &mut self.d_dx, &mut self.d_dy] {
            v.clear();
            v.resize(len, 0.0);
        }
    }
}

fn check_args(kind: &InterpKind, dx_n: f64, dy_n: f64, z: f64, support: &SupportSet) -> Result<()> {
    kind.validate()?;
    support.validate()?;
    let t = support.t_max() as f64;
    if !dx_n.is_finite() || !dy_n.is_finite() {
        return Err(Error::Domain("sampling offset must be finite".into()));
    }
    if !(0.0..=t).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, {t}]")));
    }
    Ok(())
}

/// Interpolates the value of a sampling point at `(dx_n, dy_n, z)`.
pub fn interp_eval(kind: &InterpKind, dx_n: f64, dy_n: f64, z: f64, support: &SupportSet) -> Result<f64> {
    check_args(kind, dx_n, dy_n, z, support)?;
    Ok(eval_unchecked(kind, dx_n, dy_n, z, support))
}

/// Partial derivatives of [`interp_eval`] with respect to every input.
///
/// At the kinks of `Linear` (integer `z`) the right derivative is used,
/// except at `z = T` where only the left one exists. When `PolyClamped`
/// clamps, only the clamping support value has a non-zero derivative.
pub fn interp_partials(
    kind: &InterpKind,
    dx_n: f64,
    dy_n: f64,
    z: f64,
    support: &SupportSet,
) -> Result<InterpPartials> {
    check_args(kind, dx_n, dy_n, z, support)?;
    let mut out = InterpPartials::zeros(support.values.len());
    partials_unchecked(kind, dx_n, dy_n, z, support, &mut out);
    Ok(out)
}

#[inline]
fn linear_segment(z: f64, t_max: usize) -> (usize, f64) {
    let k = (z.floor() as usize).min(t_max - 1);
    (k, z - k as f64)
}

/// Inverse-distance terms: squared normalized distance per support, or the
/// index of an exact hit when `epsilon_dist` is zero.
fn inv_dist_q(
    kind: &InterpKind,
    three_d: bool,
    dx_n: f64,
    dy_n: f64,
    z: f64,
    support: &SupportSet,
    i: usize,
) -> f64 {
    let (nh, nw, nt) = kind.norms(support.t_max());
    let dz = (z - i as f64) / nt;
    let mut q = dz * dz;
    if three_d {
        let ddx = (dx_n - support.dx[i]) / nh;
        let ddy = (dy_n - support.dy[i]) / nw;
        q += ddx * ddx + ddy * ddy;
    }
    q
}

fn exact_hit(kind: &InterpKind, three_d: bool, dx_n: f64, dy_n: f64, z: f64, support: &SupportSet) -> Option<usize> {
    if kind.epsilon_dist > 0.0 {
        return None;
    }
    (0..support.values.len()).find(|&i| inv_dist_q(kind, three_d, dx_n, dy_n, z, support, i) == 0.0)
}

fn lagrange_basis(z: f64, t_max: usize, i: usize) -> f64 {
    let mut l = 1.0;
    for j in 0..=t_max {
        if j != i {
            l *= (z - j as f64) / (i as f64 - j as f64);
        }
    }
    l
}

fn lagrange_basis_deriv(z: f64, t_max: usize, i: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..=t_max {
        if k == i {
            continue;
        }
        let mut term = 1.0 / (i as f64 - k as f64);
        for j in 0..=t_max {
            if j != i && j != k {
                term *= (z - j as f64) / (i as f64 - j as f64);
            }
        }
        sum += term;
    }
    sum
}

fn poly_value(z: f64, values: &[f64]) -> f64 {
    let t = values.len() - 1;
    values
        .iter()
        .enumerate()
        .map(|(i, s)| lagrange_basis(z, t, i) * s)
        .sum()
}

/// Index of the first minimum and first maximum support value.
fn value_range(values: &[f64]) -> ((usize, f64), (usize, f64)) {
    let mut lo = (0, values[0]);
    let mut hi = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < lo.1 {
            lo = (i, v);
        }
        if v > hi.1 {
            hi = (i, v);
        }
    }
    (lo, hi)
}

pub(crate) fn eval_unchecked(kind: &InterpKind, dx_n: f64, dy_n: f64, z: f64, support: &SupportSet) -> f64 {
    let values = support.values;
    let t = support.t_max();
    match kind.variant {
        InterpVariant::Linear => {
            let (k, f) = linear_segment(z, t);
            (1.0 - f) * values[k] + f * values[k + 1]
        }
        InterpVariant::InvDist3D | InterpVariant::InvDist1D => {
            let three_d = kind.variant == InterpVariant::InvDist3D;
            if let Some(i) = exact_hit(kind, three_d, dx_n, dy_n, z, support) {
                return values[i];
            }
            let (mut num, mut den) = (0.0, 0.0);
            for (i, s) in values.iter().enumerate() {
                let w = 1.0 / (inv_dist_q(kind, three_d, dx_n, dy_n, z, support, i) + kind.epsilon_dist);
                num += w * s;
                den += w;
            }
            num / den
        }
        InterpVariant::Poly => poly_value(z, values),
        InterpVariant::PolyClamped => {
            let (lo, hi) = value_range(values);
            poly_value(z, values).clamp(lo.1, hi.1)
        }
    }
}

pub(crate) fn partials_unchecked(
    kind: &InterpKind,
    dx_n: f64,
    dy_n: f64,
    z: f64,
    support: &SupportSet,
    out: &mut InterpPartials,
) {
    let values = support.values;
    let t = support.t_max();
    out.reset(values.len());
    match kind.variant {
        InterpVariant::Linear => {
            let (k, f) = linear_segment(z, t);
            out.d_values[k] = 1.0 - f;
            out.d_values[k + 1] = f;
            out.d_z = values[k + 1] - values[k];
        }
        InterpVariant::InvDist3D | InterpVariant::InvDist1D => {
            let three_d = kind.variant == InterpVariant::InvDist3D;
            if let Some(i) = exact_hit(kind, three_d, dx_n, dy_n, z, support) {
                out.d_values[i] = 1.0;
                return;
            }
            let (nh, nw, nt) = kind.norms(t);
            let n = values.len();
            let mut w = [0.0f64; 16];
            let mut w_vec;
            let w: &mut [f64] = if n <= 16 {
                &mut w[..n]
            } else {
                w_vec = vec![0.0; n];
                &mut w_vec
            };
            let mut den = 0.0;
            let mut num = 0.0;
            for i in 0..n {
                w[i] = 1.0 / (inv_dist_q(kind, three_d, dx_n, dy_n, z, support, i) + kind.epsilon_dist);
                den += w[i];
                num += w[i] * values[i];
            }
            let s = num / den;
            for i in 0..n {
                out.d_values[i] = w[i] / den;
                // ds/dq_i = ds/dw_i * dw_i/dq_i = (s_i - s)/den * (-w_i^2)
                let ds_dq = -(values[i] - s) / den * w[i] * w[i];
                out.d_z += ds_dq * 2.0 * (z - i as f64) / (nt * nt);
                if three_d {
                    let gx = ds_dq * 2.0 * (dx_n - support.dx[i]) / (nh * nh);
                    let gy = ds_dq * 2.0 * (dy_n - support.dy[i]) / (nw * nw);
                    out.d_dx_n += gx;
                    out.d_dy_n += gy;
                    out.d_dx[i] = -gx;
                    out.d_dy[i] = -gy;
                }
            }
        }
        InterpVariant::Poly | InterpVariant::PolyClamped => {
            if kind.variant == InterpVariant::PolyClamped {
                let (lo, hi) = value_range(values);
                let p = poly_value(z, values);
                if p > hi.1 {
                    out.d_values[hi.0] = 1.0;
                    return;
                }
                if p < lo.1 {
                    out.d_values[lo.0] = 1.0;
                    return;
                }
            }
            for i in 0..values.len() {
                out.d_values[i] = lagrange_basis(z, t, i);
                out.d_z += lagrange_basis_deriv(z, t, i) * values[i];
            }
        }
    }
}

/// True when `PolyClamped` would clamp at `z`, i.e. the polynomial leaves the
/// range of the support values.
pub fn poly_overshoots(z: f64, values: &[f64]) -> bool {
    let (lo, hi) = value_range(values);
    let p = poly_value(z, values);
    p > hi.1 || p < lo.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SWING: [f64; 4] = [0.6, 0.8, 0.05, 0.4];
    const ZEROS4: [f64; 4] = [0.0; 4];

    fn set<'a>(v: &'a [f64], dx: &'a [f64], dy: &'a [f64]) -> SupportSet<'a> {
        SupportSet::new(v, dx, dy).unwrap()
    }

    #[test]
    fn linear_midpoint() {
        let s = set(&[0.0, 1.0], &[0.0; 2], &[0.0; 2]);
        assert_eq!(interp_eval(&InterpKind::linear(), 0.0, 0.0, 0.5, &s).unwrap(), 0.5);
        let p = interp_partials(&InterpKind::linear(), 0.0, 0.0, 0.5, &s).unwrap();
        assert_eq!(p.d_z, 1.0);
        assert_eq!(p.d_values, vec![0.5, 0.5]);
    }

    #[test]
    fn linear_kink_conventions() {
        let s = set(&[0.0, 1.0, 5.0], &[0.0; 3], &[0.0; 3]);
        let k = InterpKind::linear();
        // right derivative at an interior node, left derivative at z = T
        assert_eq!(interp_partials(&k, 0.0, 0.0, 1.0, &s).unwrap().d_z, 4.0);
        assert_eq!(interp_partials(&k, 0.0, 0.0, 0.0, &s).unwrap().d_z, 1.0);
        assert_eq!(interp_partials(&k, 0.0, 0.0, 2.0, &s).unwrap().d_z, 4.0);
    }

    #[test]
    fn poly_swing_values() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        let k = InterpKind::poly();
        assert_eq!(interp_eval(&k, 0.0, 0.0, 2.0, &s).unwrap(), 0.05);
        let v = interp_eval(&k, 0.0, 0.0, 1.5, &s).unwrap();
        assert!((v - 0.415625).abs() < 1e-12, "{v}");
    }

    #[test]
    fn lagrange_basis_at_midpoint() {
        // independent of poly_value: the basis weights at z = 1.5 for nodes 0..3
        let expect = [-0.0625, 0.5625, 0.5625, -0.0625];
        for (i, e) in expect.iter().enumerate() {
            assert!((lagrange_basis(1.5, 3, i) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn inv1d_swing_midpoint() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        let k = InterpKind::inv1d().with_epsilon(0.0).with_norms(1.0, 1.0, 3.0);
        let v = interp_eval(&k, 0.0, 0.0, 1.5, &s).unwrap();
        assert!((v - 0.4325).abs() < 1e-12, "{v}");
    }

    #[test]
    fn inv3d_without_spatial_offsets_matches_inv1d() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        for z in [0.0, 0.3, 1.5, 2.9, 3.0] {
            let a = interp_eval(&InterpKind::inv3d(), 0.0, 0.0, z, &s).unwrap();
            let b = interp_eval(&InterpKind::inv1d(), 0.0, 0.0, z, &s).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn inv1d_partial_z_matches_central_difference() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        let k = InterpKind::inv1d();
        let h = 1e-5;
        let fd = (interp_eval(&k, 0.0, 0.0, 1.5 + h, &s).unwrap()
            - interp_eval(&k, 0.0, 0.0, 1.5 - h, &s).unwrap())
            / (2.0 * h);
        let p = interp_partials(&k, 0.0, 0.0, 1.5, &s).unwrap();
        assert!((p.d_z - fd).abs() < 1e-6, "{} vs {fd}", p.d_z);
    }

    #[test]
    fn exact_hit_with_zero_epsilon() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        let k = InterpKind::inv1d().with_epsilon(0.0);
        assert_eq!(interp_eval(&k, 0.0, 0.0, 1.0, &s).unwrap(), 0.8);
        let p = interp_partials(&k, 0.0, 0.0, 1.0, &s).unwrap();
        assert_eq!(p.d_values, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.d_z, 0.0);
    }

    #[test]
    fn poly_node_partials_are_one_hot() {
        for t in 1..=5usize {
            let vals: Vec<f64> = (0..=t).map(|i| (i as f64 * 0.37).sin()).collect();
            let zeros = vec![0.0; t + 1];
            let s = set(&vals, &zeros, &zeros);
            for node in 0..=t {
                let p = interp_partials(&InterpKind::poly(), 0.0, 0.0, node as f64, &s).unwrap();
                for (i, d) in p.d_values.iter().enumerate() {
                    assert_eq!(*d, if i == node { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn clamped_poly_indicator() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        // The cubic through the Fig. 6 values dips below 0.05 on (2, 3).
        let z = (20..30)
            .map(|k| k as f64 / 10.0)
            .find(|&z| poly_overshoots(z, &SWING))
            .expect("overshoot on (2,3)");
        let k = InterpKind::poly_clamped();
        let v = interp_eval(&k, 0.0, 0.0, z, &s).unwrap();
        assert_eq!(v, 0.05);
        let p = interp_partials(&k, 0.0, 0.0, z, &s).unwrap();
        assert_eq!(p.d_values, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.d_z, 0.0);
    }

    #[test]
    fn domain_and_arity_errors() {
        let s = set(&SWING, &ZEROS4, &ZEROS4);
        assert!(matches!(
            interp_eval(&InterpKind::poly(), 0.0, 0.0, 3.5, &s),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            interp_eval(&InterpKind::poly(), 0.0, 0.0, -0.1, &s),
            Err(Error::Domain(_))
        ));
        assert!(matches!(SupportSet::new(&[1.0], &[0.0], &[0.0]), Err(Error::Arity(_))));
        assert!(matches!(SupportSet::new(&[1.0, 2.0], &[0.0], &[0.0, 0.0]), Err(Error::Arity(_))));
        let bad = InterpKind::inv1d().with_epsilon(-1.0);
        assert!(interp_eval(&bad, 0.0, 0.0, 1.0, &s).is_err());
    }

    #[test]
    fn parses_cli_names() {
        for v in InterpVariant::ALL {
            assert_eq!(v.as_str().parse::<InterpVariant>().unwrap(), v);
        }
        assert!("cubic".parse::<InterpKind>().is_err());
        assert_eq!("poly-clamped".parse::<InterpKind>().unwrap().variant, InterpVariant::PolyClamped);
    }

    fn support_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..=5).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(-3.0f64..3.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn node_identity((v, dx, dy) in support_strategy()) {
            let s = set(&v, &dx, &dy);
            for i in 0..v.len() {
                for k in [InterpKind::linear(), InterpKind::poly()] {
                    let got = interp_eval(&k, 0.0, 0.0, i as f64, &s).unwrap();
                    prop_assert!((got - v[i]).abs() <= 1e-12);
                }
                let k = InterpKind::inv1d();
                let got = interp_eval(&k, 0.0, 0.0, i as f64, &s).unwrap();
                let maxabs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let t = (v.len() - 1) as f64;
                prop_assert!((got - v[i]).abs() <= 8.0 * k.epsilon_dist * t * t * v.len() as f64 * maxabs + 1e-15);
            }
        }

        #[test]
        fn convex_hull((v, dx, dy) in support_strategy(), zf in 0.0f64..1.0, ox in -3.0f64..3.0, oy in -3.0f64..3.0) {
            let s = set(&v, &dx, &dy);
            let z = zf * (v.len() - 1) as f64;
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for k in [InterpKind::linear(), InterpKind::inv3d().with_norms(8.0, 8.0, (v.len()-1) as f64), InterpKind::inv1d(), InterpKind::poly_clamped()] {
                let got = interp_eval(&k, ox, oy, z, &s).unwrap();
                prop_assert!(got >= lo - 1e-12 && got <= hi + 1e-12, "{:?} {} not in [{}, {}]", k.variant, got, lo, hi);
            }
        }

        #[test]
        fn linear_in_values((v, dx, dy) in support_strategy(), zf in 0.0f64..1.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let w: Vec<f64> = v.iter().map(|x| (x * 3.1).cos()).collect();
            let mix: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
            let z = zf * (v.len() - 1) as f64;
            for variant in InterpVariant::ALL.into_iter().filter(|v| v.is_linear_in_values()) {
                let k = InterpKind::new(variant);
                let f = |vals: &[f64]| interp_eval(&k, 0.5, -0.5, z, &set(vals, &dx, &dy)).unwrap();
                let lhs = f(&mix);
                let rhs = a * f(&v) + b * f(&w);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{:?}: {} vs {}", variant, lhs, rhs);
            }
        }
    }
}
