//! Configuration-driven front end for the estimate laboratory.

pub mod config;
pub mod experiments;
pub mod run;

pub use config::{Flags, RunConfig, Settings};
pub use run::{execute, Selector, EXIT_ASSERTION, EXIT_CONFIG, EXIT_OK};
