//! Rational points near manifolds.
//!
//! Exact and floating exterior algebra, Monge-parametrised manifolds with
//! moving frames, enumeration and counting of rational points near them,
//! lattice-based detection cells, families of parallelepipeds, dual curves and
//! ubiquity estimates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected; index loops mirror the formulas
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]
pub mod cells;
pub mod dual;
pub mod error;
pub mod frames;
pub mod identities;
pub mod lattice;
pub mod linalg;
pub mod manifold;
pub mod multivector;
pub mod pbox;
pub mod poly;
pub mod rats;
pub mod scalar;
pub mod ubiquity;

pub use error::{Error, Result};
pub use scalar::{Rat, Scalar};
