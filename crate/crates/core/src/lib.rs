pub mod constants;
pub mod error;
pub mod mc;
pub mod quadrature;
pub mod special;
pub mod vecops;

pub use error::{Error, Result};
pub mod geometry;
pub mod scaling;
pub mod bubbles;
pub mod green;
pub mod sigma;
pub mod projection;
pub mod reduced;
pub mod config;
pub mod report;
pub mod checks;
pub mod runner;
