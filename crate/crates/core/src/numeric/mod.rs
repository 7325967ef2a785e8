//! Numeric kernel: dense matrices, special functions, SPD solves,
//! deterministic random streams, and the reverse-mode tape.

pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod special;
pub mod tape;

pub use linalg::{cholesky, solve_lower, solve_lower_transpose, spd_solve};
pub use matrix::{gemm, Matrix};
pub use rng::RngStream;
pub use special::{erf, erfc, inv_norm_cdf, norm_cdf, norm_pdf, stable_softmax};
pub use tape::{Axis, Gradients, NodeId, Tape};
