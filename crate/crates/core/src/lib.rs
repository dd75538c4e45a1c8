pub mod bayes;
pub mod cli;
pub mod error;
pub mod eval;
pub mod model;
pub mod store;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
