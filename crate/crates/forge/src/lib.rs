//! Design-space exploration toolkit for HLS pragma tuning.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`analyzer`] parses a restricted-C kernel and extracts loops, arrays,
//!    and the top-level function.
//! 2. [`pragma`] turns that structure into tunable directive sites, validates
//!    configurations, and rewrites source text with directive lines.
//! 3. [`design_space`] enumerates the legal configuration tree exhaustively;
//!    [`bayes`] searches it with a Gaussian-process surrogate instead.
//! 4. [`qor`] scores a configuration, either with the built-in analytic model
//!    or by shelling out to a synthesis adapter and parsing its XML report.
//! 5. [`metrics`] computes Pareto fronts, distance metrics, and effort labels.
//! 6. [`dataset`] serializes scored designs into the JSON record layout used
//!    for corpus building, and [`orchestrator`] runs whole kernel directories.

pub mod analyzer;
pub mod bayes;
pub mod dataset;
pub mod design_space;
pub mod metrics;
pub mod orchestrator;
pub mod pragma;
pub mod qor;
pub mod source;

pub use source::{Diagnostic, Location, SourceFile, SourceUnit};
