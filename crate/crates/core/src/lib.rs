//! Numerical laboratory for alpha-numbers and square functions on
//! discretized Ahlfors-regular measures.

pub mod alpha;
pub mod config;
pub mod error;
pub mod kernels;
pub mod lattice;
pub mod measures;
pub mod pipeline;
pub(crate) mod spatial;
pub mod sqfn;
pub mod suite;
pub mod sum;
mod transport;
pub mod verify;

pub use error::{Error, Result};
