//! Library half of the command-line driver. The binary stays a thin argument
//! parser; everything worth testing (config schema, complex-number forms,
//! study assembly) lives here so integration tests can reach it directly.

pub mod config;
