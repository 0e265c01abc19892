//! Command-line and HTTP front ends for fuzzlens.

pub mod error;
pub mod http;
pub mod table;
pub mod workspace;

pub use error::{ApiError, ErrorClass};
pub use workspace::{to_json, Workspace};
