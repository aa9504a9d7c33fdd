pub mod campaign;
pub mod dynamics;
pub mod ensemble;
pub mod error;
mod kernel;
pub mod metrics;
pub mod signal;

pub use error::{Error, Result};
