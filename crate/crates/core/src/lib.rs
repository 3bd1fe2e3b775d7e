pub mod besov;
pub mod dyadic;
pub mod error;
pub mod exponent;
pub mod grid;
pub mod lab;
pub mod paraproduct;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
pub use exponent::Exponent;
