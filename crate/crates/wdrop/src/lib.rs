//! File formats, benchmark runner and command-line interface for
//! [`wdrop_core`].

// `!(x >= 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod csv_io;
pub mod report;

pub use wdrop_core as core;
