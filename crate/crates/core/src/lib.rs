//! Convolution calculus and convolution semigroups on the Heisenberg group.

pub mod cli;
pub mod error;
pub mod generators;
pub mod grid;
pub mod group_conv;
pub mod linalg;
pub mod perturbation;
pub mod semigroups;
pub mod specfun;
pub mod symbols;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
