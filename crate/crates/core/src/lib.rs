//! Quasi-static perfect plasticity on the unit square and its rigid-plastic
//! limit under stiffening elasticity.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod evolution;
pub mod fem;
pub mod linalg;
pub mod numfmt;
pub mod rigid_limit;
pub mod safeload;
pub mod tensor;
