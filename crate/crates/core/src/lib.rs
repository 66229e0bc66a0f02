//! Solver and numerical certifier for positive decaying radial solutions of
//! `Δu + f(x,u) + g(|x|)·x·∇u = 0` outside a ball in `ℝⁿ`, `n ≥ 3`.
//!
//! The pipeline checks the integral hypotheses on the logarithmic derivative
//! `b = u'/u`, iterates the integral operator whose fixed point yields the
//! ODE solution `u(t) = u0·exp(∫b)`, lifts it to the radial super-solution
//! `U(r) = u(t)/t`, and verifies the resulting inequalities and decay rate.

pub mod checker;
pub mod config;
pub mod discretization;
pub mod error;
pub mod par;
pub mod pipeline;
pub mod problem;
pub mod quadrature;
pub mod radial;
pub mod scalar_map;
pub mod solver;

pub use error::{Error, Result};
