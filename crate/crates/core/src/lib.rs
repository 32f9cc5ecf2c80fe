//! Consensus equilibrium for networks of agent maps.
//!
//! `N` agents `F_i : Rⁿ → Rⁿ` with weights `μ_i` are in equilibrium at
//! `(x*, u*)` when `F_i(x* + u_i*) = x*` for every `i` and `Σ μ_i u_i* = 0`.
//! Stacking `v_i = x* + u_i*` turns this into `F(v) = G(v)`, where `F`
//! applies each agent to its own block and `G` replaces every block with the
//! weighted mean. Equivalently `v` is a fixed point of
//! `T = (2G − I)(2F − I)`.
//!
//! The crate provides the agents used in the experiments ([`agents`]), the
//! stacked operators ([`equilibrium`]), interchangeable solvers behind a
//! name registry ([`solvers`]), and exact oracles plus spectral diagnostics
//! for validating them ([`analysis`]). Dense linear algebra lives in
//! [`tensor`].

// negated comparisons reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agents;
pub mod analysis;
pub mod equilibrium;
pub mod error;
pub mod solvers;
pub mod tensor;

pub use equilibrium::{denoiser_weights, CESolution, Problem, StackedPoint, Weights};
pub use error::{Error, Result};
pub use solvers::{RunTrace, Solver, SolverConfig, SolverRegistry};
