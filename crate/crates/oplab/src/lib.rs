//! Numerical laboratory for structured integral operators on [0, l]:
//! builds the operators from a matrix function, measures how well they
//! satisfy their operator identities, checks positivity, and computes the
//! triangular factorization of the inverse.

pub mod config;
pub mod error;
pub mod grid;
pub mod identity;
pub mod linalg;
pub mod matfun;
pub mod operators;
pub mod quad;
pub mod report;
pub mod spectral;
pub mod suite;

pub use error::{Error, Result};
