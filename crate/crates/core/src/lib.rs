//! Visual localization from scene-specific landmarks.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod detect;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod landmark;
pub mod pnp;
pub mod sim;
pub mod triplet;
