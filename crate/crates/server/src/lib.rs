//! HTTP service and command line over a file-backed analysis workspace.

pub mod api;
pub mod cli;
pub mod pipeline;
pub mod workspace;

pub use workspace::{Workspace, WorkspaceError};
