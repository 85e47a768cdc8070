//! Pointwise equivariant differential forms, superconnection Chern characters,
//! transgression forms, and their pairings against test densities on the Lie
//! algebra.
//!
//! The crate is organised bottom-up:
//!
//! * [`exterior`], [`graded`], [`hermitian`], [`expm`]: the graded algebra
//!   End(E⁺⊕E⁻)⊗Λ, its supertrace, norm, and exponential;
//! * [`calculus`]: charted group actions, the equivariant differential
//!   D = d − ι(VX), moments of invariant one-forms;
//! * [`chern`]: curvature, Chern and transgression forms, truncated β
//!   integrals, products of symbols and of relative representatives;
//! * [`generalized`]: test densities and the pairings that give meaning to
//!   forms with generalized coefficients;
//! * [`catalog`]: the worked examples with closed-form oracles;
//! * [`verify`]: the named checks, run configuration and reports used by the
//!   command-line driver.

#![allow(clippy::needless_range_loop)]

pub mod calculus;
pub mod catalog;
pub mod chern;
pub mod error;
pub mod expm;
pub mod exterior;
pub mod generalized;
pub mod graded;
pub mod hermitian;
pub mod quadrature;
pub mod reference;
pub mod verify;

pub use error::{Error, Result};
pub use expm::super_exponential;
pub use exterior::ExteriorElement;
pub use graded::{graded_norm, supertrace, wedge_product, GradedMatrixForm, Parity};
pub use hermitian::{smallest_eigenvalue, HermitianPart};
