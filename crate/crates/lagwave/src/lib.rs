//! Axisymmetric (2.5D) acoustic and elastic wave modeling by the Laguerre
//! spectral-time method.
//!
//! The time axis is handled by an integral Laguerre transform: one fixed
//! elliptic operator is inverted per medium for a sequence of harmonic
//! right-hand sides. Each solve uses a Krylov method (CG for the acoustic
//! problem, restarted GMRES for the elastic one) preconditioned by a
//! variable-separation fast solver whose kernel is a factor-once /
//! solve-many tridiagonal engine.

pub mod driver;
pub mod error;
pub mod field;
pub mod krylov;
pub mod laguerre;
pub mod medium;
pub mod operators;
pub mod precond;
pub mod scenario;
pub mod selftest;
pub mod tridiag;

pub use error::{Error, Result};
pub use field::Field2D;
