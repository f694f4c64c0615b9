//! Random sections of spherical convex bodies.
//!
//! The distance Δ between two uniform points of a convex body `K ⊂ S^{d−1}`
//! has density
//!
//! ```text
//! f_Δ(t) = sin^{d−2} t / |K| · (ω_{d−1} − (ω_d / 2π) (|∂K| / |K|) ∫_0^t (1 − F_σ(s)) ds)
//! ```
//!
//! where `F_σ` is the distribution of the length of a Haar-random
//! great-circle chord of `K`. This crate evaluates that transform, the
//! closed forms for spherical caps, and Monte Carlo checks of the
//! underlying Crofton and Blaschke–Petkantschin identities.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod mc;
pub mod samplers;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
