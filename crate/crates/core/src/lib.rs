//! Geometric bulk-growth mechanics: evolving material metrics, residual
//! stress in radially grown bodies, stress-free growth, and the linearized
//! eigenstrain theory.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffgeo;
pub mod embed;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod field;
pub mod kinematics;
pub mod lattice;
pub mod linearized;
pub mod output;
pub mod quadrature;
pub mod residual;
pub mod roots;
pub mod stressfree;

pub use error::{GrowthError, Result};
