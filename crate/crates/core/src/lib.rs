pub mod data;
pub mod diffcore;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod models;
pub mod training;
pub mod uncertainty;

pub use error::{Error, Result};
