pub mod bath;
pub mod constants;
pub mod error;
pub mod lsq;
pub mod pulse;
pub mod readout;
pub mod spectroscopy;
pub mod spin;

pub use error::{Error, Result};
