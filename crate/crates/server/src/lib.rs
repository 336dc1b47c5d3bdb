//! Labeling service and command-line front end for `activelabel`.
//!
//! The HTTP API ([`api::router`]) wraps active-labeling sessions for a human
//! annotator; [`store::Store`] keeps every session on disk so a restarted
//! server picks up exactly where it stopped.

pub mod api;
pub mod commands;
pub mod export;
pub mod store;

pub use api::{router, ApiSession};
pub use store::Store;
