//! Command implementations behind the `viscowave` binary.

pub mod certify;
pub mod config;
pub mod output;
pub mod plot;
pub mod selfcheck;
pub mod simulate;
pub mod sweep;
