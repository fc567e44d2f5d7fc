//! Generalized deformable convolution for video frame interpolation.
//!
//! Each output pixel is a weighted, modulated sum over sampling points that
//! move freely in space-time. A sampling point's value is interpolated in
//! time from `T+1` support points, one per source frame, each with its own
//! spatial offset. The crate provides the operator with exact gradients for
//! every adaptive parameter, the constructors under which it collapses to
//! fixed-kernel convolution, deformable convolution or flow warping, image
//! quality metrics, and a small end-to-end training loop on synthetic motion.

pub mod error;
pub mod frame;
pub mod gdconv;
pub mod gradcheck;
pub mod interp;
pub mod io;
pub mod metrics;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
pub use frame::{Field, Frame, FrameStack};
pub use gdconv::{
    gdconv_backward, gdconv_forward, make_adacof, make_conventional, make_flow, FreedomVariant, GDConvParams,
    GradBundle, ParamField,
};
pub use interp::{interp_eval, interp_partials, InterpKind, InterpPartials, InterpVariant, SupportSet};
pub use sampler::{bilinear_partials, bilinear_sample, BilinearPartials, SamplePos};
