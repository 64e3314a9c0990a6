//! HTTP service and command-line tools around the sketch-retrieve-align loop.

pub mod cli;
pub mod http;
pub mod journal;
pub mod session;

pub use session::{SessionError, SessionState, Workbench};
