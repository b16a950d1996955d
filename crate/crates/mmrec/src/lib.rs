pub mod data;
pub mod encoders;
pub mod error;
pub mod nn;

pub use error::{Error, Result};
