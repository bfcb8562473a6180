pub mod allocator;
pub mod config;
pub mod error;
pub mod infocalc;
pub mod model;
pub mod quadrature;
pub mod rates;
pub mod simulator;
pub mod sweep;

pub use error::{Error, Result};
