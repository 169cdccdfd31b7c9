//! Desk-scale exact simulator for quantum linear-system solvers.
//!
//! Given a d-sparse Hermitian A with ‖A‖ = 1 and eigenvalues confined to
//! D_κ = [−1, −1/κ] ∪ [1/κ, 1], the crate prepares a state proportional to
//! A⁻¹|b⟩ three ways: a Fourier-integral decomposition of 1/x applied through
//! Hamiltonian evolution, a Chebyshev-series decomposition applied through a
//! quantum-walk dilation, and a variable-time amplitude-amplification pipeline
//! that schedules per-eigenvalue effort via gapped phase estimation.
//!
//! Everything is simulated exactly over explicit state vectors (no Trotter or
//! sampling error), so every advertised error bound and query-count scaling
//! can be certified by direct computation. Query costs are tracked in a
//! [`CostLedger`]; see that module for the accounting conventions.
//!
//! Module map:
//! - [`problem`]: instances, entry oracles, Hermitian dilation, generators.
//! - [`approx`]: Fourier and Chebyshev approximations of 1/x, certified.
//! - [`simcore`]: state vectors, exact evolution, the quantum walk.
//! - [`lcu`]: linear-combination-of-unitaries engine and amplification.
//! - [`solver`]: end-to-end solvers plus closeness diagnostics.
//! - [`vtaa`]: the variable-time pipeline and its cost model.

pub mod approx;
pub mod error;
pub mod lcu;
pub mod ledger;
pub mod linalg;
pub mod problem;
pub mod simcore;
pub mod solver;
pub mod vtaa;

pub use error::{Error, Result};
pub use ledger::CostLedger;
pub use linalg::C64;
