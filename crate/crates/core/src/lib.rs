//! Effective operators of two-component composites on finite-dimensional
//! orthogonal subspace collections, with the subspace recursion that turns
//! them into continued fractions.

pub mod cli;
pub mod collections;
pub mod composite;
pub mod error;
pub mod eval;
pub mod numlin;
pub mod recursion;
pub mod verify;
pub mod ysolver;
pub mod zsolver;

pub use collections::{ModuliPair, Z2Collection};
pub use error::{Error, Result};
pub use numlin::{Basis, CMatrix, Tolerances, C64};
