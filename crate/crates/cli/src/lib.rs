//! Library side of the `dla` command.

pub mod acceptance;
pub mod oracle;
pub mod synthetic;
pub mod workflow;
