//! Experiment harness around the unlearning core: config parsing,
//! dataset and checkpoint file formats, experiment orchestration,
//! verification-suite and difficulty-coupling studies, and report
//! emission. The `ofmu` binary is a thin CLI over this crate.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod report;
pub mod udi_study;
pub mod verify_suite;

pub use error::LabError;
