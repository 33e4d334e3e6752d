#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod adaptive;
pub mod codec;
pub mod compact;
pub mod cues;
pub mod error;
pub mod geometry;
pub mod image;
pub mod math;
pub mod metrics;
pub mod mpi;
pub mod pipeline;
pub mod synthetic;
