pub mod arnold;
pub mod cli;
pub mod complex;
pub mod error;
pub mod forests;
pub mod linalg;
pub mod oracle;

pub use error::{Error, Result};
