//! Construction and verification of generalized m-quasi-Einstein metrics
//! `ḡ = g/φ²` conformal to a flat pseudo-Euclidean space.
//!
//! Candidates are built from an invariant `ξ(x)` and profiles `φ(ξ)`, `h(ξ)`,
//! `λ(ξ)`; [`conformal`] evaluates the full tensor equation
//! `Ric_ḡ − (m/h) Hess_ḡ h = λ ḡ` pointwise and [`geometry`] supplies an
//! independent finite-difference curvature oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod error;
pub mod fields;
pub mod fluid;
pub mod geometry;
pub mod reduction;

pub use error::{QemError, Result};

#[cfg(test)]
mod family_properties;
