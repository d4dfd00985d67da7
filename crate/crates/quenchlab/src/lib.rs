//! Scenario files, simulation pipeline, verification and output formats
//! on top of `quenchlab-core`.

pub mod config;
pub mod gridfile;
pub mod lab;
pub mod output;
pub mod sweep;
