//! File formats and the command-line front end for `ctrlrank-core`.

pub mod app;
pub mod cert;
pub mod uop;
