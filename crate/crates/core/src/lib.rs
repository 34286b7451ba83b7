//! Democratic (minimum ℓ∞-norm) representations of signals over redundant frames.
//!
//! Given an `M × N` frame `D` with `M ≤ N` and a signal `y ∈ ℂᴹ`, the crate solves
//!
//! ```text
//! minimize ‖x‖∞  subject to  ‖y − D x‖₂ ≤ ε
//! ```
//!
//! with two first-order methods: a primal-dual hybrid gradient scheme for arbitrary
//! frames and `ε ≥ 0` ([`solvers::solve_cram`]), and a Douglas–Rachford scheme for
//! Parseval frames with `ε = 0` ([`solvers::solve_cramp`]). Both produce dual
//! certificates so the optimality gap of every returned solution can be checked.
//!
//! The [`metrics`] module evaluates PAPR, democracy bounds and power increase, and
//! [`experiments`] contains the Monte-Carlo harness for phase diagrams and OFDM
//! tone-reservation studies.

pub mod error;
pub mod experiments;
pub mod frames;
pub mod io;
pub mod metrics;
pub mod prox;
pub mod solvers;
pub mod vecops;

pub use error::{Error, Result};
pub use frames::{FrameBounds, FrameKind, FrameOperator, UpCertificate};
pub use num_complex::Complex64 as C64;
pub use solvers::{SolverConfig, SolverResult};
