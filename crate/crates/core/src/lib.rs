//! Tensor product (operator-Schmidt) decomposition of unitaries.
//!
//! The crate provides two independent routes to `U = Σ_k s_k A_k ⊗ B_k`:
//!
//! * [`tpd::classical_tpd`]: reshuffle `U` and take a singular value decomposition.
//! * [`qtpd`]: prepare the Choi state of `U` in a statevector simulator, take
//!   (exact, tomographic or sequential) snapshots of its reduced state on the small
//!   subsystem, diagonalize to obtain `s_k` and `A_k`, then distill the action of
//!   each `B_k` by projective measurement.
//!
//! On top of these sit the derived analyses ([`analysis`]) and the Heisenberg-model
//! experiment drivers ([`experiments`]).

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod qtpd;
pub mod rng;
pub mod statevector;
pub mod tpd;

pub use error::{Error, Result};
pub use linalg::{BipartiteSplit, CMatrix, C64};
