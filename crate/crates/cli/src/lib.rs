//! File formats, fixtures, and report serialization for the
//! `memberscope` command-line tool. The numerics live in
//! `memberscope-core`; this crate only moves data in and out.

pub mod format;
pub mod report;
pub mod svg;

pub use format::{load_experiment, load_povm, write_atomic, ExperimentFile, FormatError};
