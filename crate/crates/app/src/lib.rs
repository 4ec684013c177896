//! Command-line tools and an HTTP service for style-aware curve enhancement.
//!
//! [`engine`] holds a loaded model and the style registry; [`session`]
//! caches predicted curves so slider edits re-render without inference;
//! [`server`] and [`cli`] are thin layers over both.

pub mod cli;
pub mod engine;
mod error;
pub mod server;
pub mod session;

pub use engine::{render, Engine, RegisteredStyle, StyleRegistry};
pub use error::{Error, Result};
