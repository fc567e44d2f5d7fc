//! Parameter constructors under which the operator reduces to earlier
//! frame-synthesis schemes: fixed-kernel adaptive convolution, spatially
//! adaptive deformable convolution, and single-source flow warping.

use crate::error::{Error, Result};
use crate::frame::Field;

use super::params::{Freedom, GDConvParams, OffsetFreedom};

const FROZEN_SHARED: Freedom = Freedom {
    offsets: OffsetFreedom::Shared,
    temporal: false,
};

/// Fixed `kernel x kernel` grid on every source frame with per-pixel weights.
///
/// Point `n = i * kernel^2 + m` samples frame `i` at grid offset `m`
/// (row-major over `-k..=k`). `weights` must have depth `(T+1) kernel^2`.
pub fn make_conventional(height: usize, width: usize, t_max: usize, kernel: usize, weights: &Field) -> Result<GDConvParams> {
    if kernel % 2 == 0 {
        return Err(Error::Arity(format!("kernel size must be odd, got {kernel}")));
    }
    if t_max == 0 {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    let taps = kernel * kernel;
    let n = (t_max + 1) * taps;
    if weights.dims() != (height, width, n) {
        return Err(Error::Shape(format!(
            "weights {:?} must be {height}x{width}x{n}",
            weights.dims()
        )));
    }
    let r = (kernel / 2) as f64;
    let off_x = |k: usize| ((k % taps) % kernel) as f64 - r;
    let off_y = |k: usize| ((k % taps) / kernel) as f64 - r;
    let mut p = GDConvParams::new(
        weights.clone(),
        Field::from_fn(height, width, n, |_, _, k| off_x(k))?,
        Field::from_fn(height, width, n, |_, _, k| off_y(k))?,
        Field::from_fn(height, width, n, |_, _, k| (k / taps) as f64)?,
        Field::filled(height, width, n, 1.0),
        Field::zeros(height, width, (t_max + 1) * n),
        Field::zeros(height, width, (t_max + 1) * n),
    )?;
    p.set_freedom(Freedom {
        offsets: OffsetFreedom::Fixed,
        temporal: false,
    });
    Ok(p)
}

/// Spatially adaptive deformable convolution: `M` points per frame with
/// adaptive offsets, evenly partitioned across the `T+1` frames.
///
/// Maps have depth `(T+1) M`; point `n = i * M + m` reads frame `i`.
pub fn make_adacof(dx_map: &Field, dy_map: &Field, weights: &Field, t_max: usize, m: usize) -> Result<GDConvParams> {
    if t_max == 0 || m == 0 {
        return Err(Error::Domain("T and M must be positive".into()));
    }
    let n = (t_max + 1) * m;
    for (name, f) in [("dx", dx_map), ("dy", dy_map), ("weights", weights)] {
        if f.depth() != n {
            return Err(Error::Shape(format!("{name} depth {} must be (T+1)*M = {n}", f.depth())));
        }
        if (f.height(), f.width()) != (weights.height(), weights.width()) {
            return Err(Error::Shape(format!("{name} map size differs from weights")));
        }
    }
    let (h, w) = (weights.height(), weights.width());
    let mut p = GDConvParams::new(
        weights.clone(),
        dx_map.clone(),
        dy_map.clone(),
        Field::from_fn(h, w, n, |_, _, k| (k / m) as f64)?,
        Field::filled(h, w, n, 1.0),
        Field::zeros(h, w, (t_max + 1) * n),
        Field::zeros(h, w, (t_max + 1) * n),
    )?;
    p.set_freedom(FROZEN_SHARED);
    Ok(p)
}

/// Backward warping of frame `source_index` by a per-pixel flow `(u, v)`.
pub fn make_flow(flow_u: &Field, flow_v: &Field, source_index: usize, t_max: usize) -> Result<GDConvParams> {
    if source_index > t_max {
        return Err(Error::Index(format!("source index {source_index} outside 0..={t_max}")));
    }
    if t_max == 0 {
        return Err(Error::Domain("T must be at least 1".into()));
    }
    if flow_u.depth() != 1 || flow_v.dims() != flow_u.dims() {
        return Err(Error::Shape("flow fields must be single-depth and equal in size".into()));
    }
    let (h, w, _) = flow_u.dims();
    let t1 = t_max + 1;
    let support = |flow: &Field| Field::from_fn(h, w, t1, |r, c, i| if i == source_index { flow.get(r, c, 0) } else { 0.0 });
    let mut p = GDConvParams::new(
        Field::filled(h, w, 1, 1.0),
        flow_u.clone(),
        flow_v.clone(),
        Field::filled(h, w, 1, source_index as f64),
        Field::filled(h, w, 1, 1.0),
        support(flow_u)?,
        support(flow_v)?,
    )?;
    p.set_freedom(Freedom {
        offsets: OffsetFreedom::Independent,
        temporal: false,
    });
    Ok(p)
}
