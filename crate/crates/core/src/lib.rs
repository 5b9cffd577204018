//! Anchor-to-barycentric (A2B) correspondence coordinates with a classical
//! matching pipeline, epipolar metrics and a synthetic repeated-pattern
//! benchmark.

// `!(x > 0.0)` is deliberate: it rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoding;
pub mod epipolar;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod params;
pub mod pipeline;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::Point2;
