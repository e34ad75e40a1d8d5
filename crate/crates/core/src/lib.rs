//! Simulation laboratory for supercritical bond percolation on `Z^d`.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: finite boxes, edge indexing, seeded sampling, clusters.
//! - [`metric`]: chemical-distance balls, distances and geodesics.
//! - [`cutpoints`]: space-time cut-point events and configuration surgery.
//! - [`renorm`]: macroscopic good/bad box classification and routing.
//! - [`combinatorics`]: projection, disjoint-path and boundary constructions.
//! - [`estimators`]: Monte Carlo estimators for distances and decay rates.
//! - [`harness`]: configuration files, CSV output, run manifests and the CLI.

// Axis loops index several per-axis arrays at once.
#![allow(clippy::needless_range_loop)]

pub mod lattice;

pub mod metric;
pub mod cutpoints;
mod num;
pub mod geometry;
pub mod renorm;
pub mod combinatorics;
pub mod estimators;
pub mod harness;
