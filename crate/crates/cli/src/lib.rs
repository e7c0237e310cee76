//! Operational side of the bridge auditor: file formats on disk, the
//! persistent hot/cold store, the live monitor, the synthetic trace
//! generator, report labeling, and the CLI commands tying them together.

pub mod commands;
pub mod logio;
pub mod monitor;
pub mod report;
pub mod sim;
pub mod store;
