pub mod error;
pub mod harness;
pub mod measures;
pub mod numeric;
pub mod samplers;
pub mod symcore;
pub mod zonal;

pub use error::{Error, Result};
