//! Design and simulation toolkit for distributed unknown-input observers
//! (D-UIO) over sensor networks monitoring a discrete-time LTI plant.
//!
//! The pipeline, bottom to top:
//!
//! * [`linalg`] — rank decisions, orthonormal bases, pseudo-inverses and
//!   unit-circle invariant-subspace splits that everything else builds on.
//! * [`graph`] — undirected communication topology and its Laplacian.
//! * [`decomp`] — per-node disturbance decoupler `(E_i, P_i)` and the
//!   detectability / observability decomposition with its triangular blocks.
//! * [`sdp`] — a thin adapter expressing linear matrix inequalities as
//!   semidefinite cone programs for the Clarabel interior-point solver.
//! * [`synthesis`] — the H-infinity local gain design, a pole-placement
//!   fallback, the diffusive consensus-gain design, gain assembly and
//!   closed-loop certification.
//! * [`sim`] — deterministic lockstep simulation of plant, controller and
//!   observer network with seeded measurement noise.

// The ordered Schur factorization in `linalg` binds LAPACK's dgees directly;
// this keeps the system BLAS/LAPACK library linked even when the solver
// backend is compiled out of the dependency graph.
extern crate openblas_src as _openblas_src;

pub mod decomp;
pub mod graph;
pub mod linalg;
pub mod sdp;
pub mod sim;
pub mod synthesis;

pub use linalg::{Matrix, Tolerance, Vector};
