pub mod analysis;
pub mod config;
pub mod criterion;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod lti;
pub mod solvers;

pub use error::{Error, Result};
