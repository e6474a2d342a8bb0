//! Fisher information and Cramér-Rao bounds for the Fourier coefficients of
//! the sample: closed-form diagonals and independent numerical matrices.

mod analytic;
mod numeric;
mod validation;

pub use analytic::*;
pub use numeric::*;
pub use validation::*;
