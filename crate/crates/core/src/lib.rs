//! Finite-dimensional constrained universes and the relational extraction of
//! time and space from them.

pub mod error;
pub mod frames;
pub mod measurements;
pub mod oracle;
pub mod relational;
pub mod relativistic;
pub mod tensor;
pub mod universe;

pub use error::{Error, Result};
pub use tensor::C64;
