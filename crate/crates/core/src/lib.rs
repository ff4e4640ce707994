//! Infinite iterated function systems on [0,1], exceptional sets with
//! prescribed digit growth, and the numerics around them.

pub mod cantor;
pub mod dimension;
pub mod error;
pub mod exponent;
pub mod growth;
pub mod ifs;
pub mod product_sets;
pub mod rigor;
pub mod scalar;
pub mod ser;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::{ArithmeticMode, Enclosure, Scalar};

/// Exact rational arithmetic.
pub type Exact = num_rational::BigRational;
/// Outward-rounded enclosures with 256 significant bits.
pub type Interval = Enclosure<256>;
/// Plain double precision.
pub type Float = f64;
