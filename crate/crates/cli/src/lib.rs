//! Command-line front end for the observer-network toolkit: scenario file
//! ingestion, built-in benchmark scenarios, the check / decompose / design /
//! simulate / report pipeline, and CSV/JSON emission.

pub mod builtin;
pub mod error;
pub mod file;
pub mod output;
pub mod pipeline;

pub use error::CliError;
