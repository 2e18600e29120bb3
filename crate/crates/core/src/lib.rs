//! Voting models on branching Brownian motion genealogies.
//!
//! The crate compiles polynomial reaction terms `f` into voting or propagation
//! rules on the genealogical tree of a branching Brownian motion, estimates the
//! solution of `u_t = Δu + f(u)` by Monte Carlo over those trees, and checks the
//! estimates against a finite-difference solver.
//!
//! * [`poly`]: power-basis polynomials and Bernstein coordinates.
//! * [`models`]: model types, compilers, forward maps and the named catalog.
//! * [`bbm`]: reproducible depth-first tree sampling.
//! * [`estimate`]: Monte Carlo estimators of `u(t, x)`.
//! * [`pde`]: the deterministic solver and front diagnostics.
//! * [`cli`]: the batch front-end behind the `voting-bbm` binary.

pub mod bbm;
pub mod cli;
pub mod estimate;
pub mod models;
pub mod numfmt;
pub mod pde;
pub mod poly;

pub use models::{Model, OffspringDistribution};
pub use poly::Polynomial;
