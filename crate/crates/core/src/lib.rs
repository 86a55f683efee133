//! Operator Schmidt decompositions of multipartite unitaries and constructive
//! controlled / diagonal forms for unitaries of operator Schmidt rank 2.
//!
//! The crate is `no_std` (it needs `alloc`). Dense complex matrices come from
//! [`nalgebra`]; every decomposition result is re-checked against an explicit
//! residual from [`Tolerances`].
//!
//! Module map:
//!
//! * [`model`]: party dimensions, operators, cuts, realignment and the basic
//!   numerical predicates.
//! * [`schmidt`]: operator Schmidt decomposition across a cut and recovery of
//!   the two-term product expansion of a rank-2 unitary.
//! * [`simdiag`]: simultaneous singular value decomposition of operator
//!   families whose pairwise products span a 2-dimensional space containing
//!   the identity.
//! * [`controlize`]: the fully controlled / diagonal form pipeline and the
//!   bipartite two-term control construction.
//! * [`detect`]: control-party scan for unitaries of any Schmidt rank and the
//!   span-dimension diagnostics.
//! * [`generate`] and [`verify`]: seeded instance families, fixtures and the
//!   independent certificate verifier.
//!
//! Multi-index convention: party 0 is the most significant digit of a flat
//! row or column index, so `kron([A, B])[(a * dB + b, a' * dB + b')]` equals
//! `A[(a, a')] * B[(b, b')]`.

#![no_std]

extern crate alloc;

pub mod controlize;
pub mod detect;
mod error;
pub mod generate;
pub mod linalg;
pub mod model;
pub mod schmidt;
pub mod simdiag;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Cut, MultipartiteOperator, PartyDims, Tolerances};

/// Complex double.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
