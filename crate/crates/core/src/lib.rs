//! Context-aware compression of convolutional networks for resource-constrained devices.

pub mod arch;
pub mod cli;
pub mod context;
pub mod costmodel;
pub mod encoding;
pub mod error;
pub mod operators;
pub mod oracle;
pub mod search;

pub use error::{Error, Result};
