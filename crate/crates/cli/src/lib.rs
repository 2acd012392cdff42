//! Command-line front end for `pcaanon-core`: batch anonymization, metric
//! reports, the image study, eigenvalue fits, and the MOS grading service.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod error;
pub mod mos;
pub mod server;

pub use app::{run, Cli};
pub use error::{CliError, CliResult};
