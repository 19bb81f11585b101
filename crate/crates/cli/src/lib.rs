//! Command-line front end for `adsym-core`: parsing, differentiation,
//! gradient checks, engine comparison, program tracing, benchmarks and
//! graph export.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod export;

pub use commands::{run, CliError};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 1;
    pub const BUDGET: i32 = 2;
    pub const DOMAIN: i32 = 3;
    pub const IO: i32 = 4;
    /// A check ran to completion and found a discrepancy.
    pub const CHECK_FAILED: i32 = 5;
}
