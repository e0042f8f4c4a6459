//! Shifted convolution sums of Hecke eigenvalues, the large-sieve machinery
//! bounding them, and the automorphic quantities (eigenforms, Bessel and
//! Eisenstein data, weight functions, symmetric-square values) around them.

pub mod arith;
pub mod cli;
pub mod equidist;
pub mod error;
pub mod largesieve;
mod ntt;
pub mod numeric;
pub mod qexpansion;
pub mod shifted;
pub mod specfun;

pub use error::{Error, Result};
