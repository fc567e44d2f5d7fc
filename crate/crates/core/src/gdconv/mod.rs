//! The modulated generalized deformable convolution operator.
//!
//! For output pixel `(x, y)`:
//!
//! ```text
//! out(x, y) = sum_n W_n * m_n * G(dx_n, dy_n, z_n, { I_i(x + dx_n^i, y + dy_n^i), dx_n^i, dy_n^i }_i)
//! ```
//!
//! where `G` is an [`InterpKind`](crate::interp::InterpKind) and each `I_i`
//! is read with replicate-padded bilinear sampling.

mod manifest;
mod modes;
mod ops;
mod params;

pub use manifest::{load_params, save_params, ParamsManifest};
pub use modes::{make_adacof, make_conventional, make_flow};
pub use ops::{gdconv_backward, gdconv_forward};
pub use params::{
    grid_offsets, Freedom, FreedomVariant, GDConvParams, GradBundle, OffsetFreedom, ParamField, ParamLayout,
};
