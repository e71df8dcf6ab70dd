//! Quasi-periodic response solutions of weakly forced systems
//! `x' = eps^a f(w t, x) + eps^b g(w t, x, eps)` with `b > a > 0`.
//!
//! The pipeline is: average the forcing ([`averaging`]), locate a
//! hyperbolic-or-elliptic equilibrium of the averaged field, bring the
//! system to the normal form `z' = eps (A + eps B) z + eps^2 p + eps h`, and
//! run the quadratically convergent iteration in [`kam`]. Every analytic
//! estimate used along the way is evaluated numerically and recorded in a
//! bounds ledger. [`resonance`] scans parameter intervals for the excluded
//! set, [`reductions`] maps second-order and degenerate systems to the
//! standard form, and [`verify`] provides independent oracles.

pub mod averaging;
pub mod demo;
pub mod error;
pub mod kam;
pub mod reductions;
pub mod resonance;
pub mod spectra;
pub mod system;
pub mod torus;
pub mod verify;

pub use error::{DivisorKind, Error, Result};
