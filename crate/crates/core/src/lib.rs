//! Competitive position-building as a sequence of small convex quadratic programs.
//!
//! A unit trading strategy on `[0, 1]` is represented by the sine coefficients of
//! `a(t) - t`, so the boundary conditions `a(0) = 0` and `a(1) = 1` hold by
//! construction. In that basis the trading cost against an opponent is an exact
//! quadratic with a diagonal Hessian, path and rate constraints become linear
//! inequalities, and a best response is a QP solve. Alternating relaxed best
//! responses traces the path to a two-trader equilibrium.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod closed_form;
pub mod constraints;
pub mod cost;
pub mod equilibrium;
mod error;
pub mod qp;
pub mod quadrature;
pub mod strategy;
pub mod trig;

pub use error::{Error, Result};
pub use strategy::{Curve, StrategyCoeffs};
