pub mod acceptance;
pub mod boundary;
pub mod cli;
pub mod domain;
pub mod error;
pub mod heat;
pub mod measure;
pub mod operator;
pub mod potential;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
