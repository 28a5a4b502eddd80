//! File-level front end for the `convertible-codes` library: stripe
//! encoding, conversion with access accounting, decoding and verification.

pub mod commands;
pub mod error;
pub mod store;

pub use commands::{convert, decode, encode, plan_only, verify, ConvertOptions, ConvertReport, EncodeOptions};
pub use error::{exit_code, CliError};
pub use store::{Manifest, NodeStore, ReadStats};
