//! File formats, experiment configuration and the `nle` command-line driver
//! on top of `nle-core`.

pub mod config;
pub mod io;
pub mod run;
