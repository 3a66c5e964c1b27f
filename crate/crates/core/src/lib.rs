//! Differentiable inductive logic programming over binarized tabular and
//! relational data.

pub mod error;
pub mod facts;
pub mod clausegen;
pub mod emit;
pub mod inference;
pub mod logic;
pub mod metrics;
pub mod synth;
pub mod tabular;
pub mod trainer;

pub use error::{Error, ErrorClass, Result};
