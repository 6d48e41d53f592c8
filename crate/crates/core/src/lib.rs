pub mod conditioned;
pub mod env;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod levels;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod valley;
pub mod walk;

pub use error::{Error, Result};
