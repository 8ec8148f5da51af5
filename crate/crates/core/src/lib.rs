//! Hyperbolic linear attention stack at desk scale: Poincare-ball
//! geometry with the curvature-aware Euclidean<->ball maps, linear and
//! softmax attention, the RWKV and SSM sequence-mixing baselines, a
//! skeleton-sequence pipeline with a synthetic generator and ridge probe,
//! and a scaling benchmark harness.

// `!(a < b)` is used deliberately so NaN fails invariant checks, and
// index-heavy loops in the numeric kernels read better than iterator
// chains over strided data.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod attention;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod model;
pub mod poincare;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use poincare::{Curvature, PoincareBatch};
pub use tensor::DenseArray;
