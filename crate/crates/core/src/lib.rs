//! Controllability of bilinear systems induced by matrix group actions.
//!
//! A system `xdot = (B0 + sum_i u_i B_i) x` with generators in a matrix Lie
//! algebra evolves on an orbit of the corresponding group. This crate decides
//! controllability from a relaxed rank condition checked at a *single* state:
//! on the sphere (skew generators) rank n-1 at one point already certifies
//! controllability, and in general the orbit of any point is the maximal
//! controllable submanifold through it, with the rank constant along it.
//!
//! Modules:
//! - [`algebra`]: generator sets, brackets, Lie closure, rank tolerances;
//! - [`rankcond`]: the single-point rank test and the controllability verdict;
//! - [`graphcrit`]: the graph-connectivity criterion for `Omega_ij` systems;
//! - [`affine`]: SE(n) generators via the homogeneous embedding;
//! - [`orbit`]: orbit sampling, rank-constancy checks, local dimension;
//! - [`sim`]: piecewise-constant control simulation by exact exponentials;
//! - [`cli`]: the JSON document schema and subcommand logic.

pub mod affine;
pub mod algebra;
pub mod cli;
pub mod error;
pub mod graphcrit;
pub mod orbit;
pub mod rankcond;
pub mod sim;

#[cfg(test)]
pub(crate) mod testutil;

pub use algebra::{
    bracket, lie_closure, subspace_rank, GeneratorSet, GroupAssertions, LieBasis, SystemKind,
    TolerancePolicy,
};
pub use error::{Error, Result};
pub use rankcond::{analyze, rank_at, required_rank, AnalysisReport, StatePoint, Verdict};
