pub mod attention;
pub mod cli;
pub mod data;
pub mod model;
pub mod error;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
pub mod spectral;
