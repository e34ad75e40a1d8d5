//! Experiment plumbing: configuration files, CSV emission, run manifests,
//! parallel replicate orchestration and the command-line front end.

pub mod cli;
pub mod config;
pub mod csv;
pub mod lemma_check;
pub mod manifest;
pub mod parallel;
