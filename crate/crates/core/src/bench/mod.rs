//! Benchmark scenarios, experiment drivers and their file outputs.

pub mod advection;
pub mod contour;
pub mod diagnostics;
pub mod disc;
pub mod io;
pub mod scenarios;
pub mod vortex;
pub mod zalesak;

pub use io::{EocRow, EocTable, ErrorSeries, RunManifest, SeriesRow};
