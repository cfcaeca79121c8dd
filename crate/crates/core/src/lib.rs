pub mod error;
pub mod experiments;
pub mod io;
pub mod models;
pub mod numeric;
pub mod regularization;
pub mod spectrum;
pub mod training;

pub use error::{Error, Result};
