//! File formats, MILP backends and orchestration for BlockSets figures.
//!
//! The algorithms live in [`blocksets_core`]; this crate reads input
//! documents, picks a solver backend, runs independent part layouts in
//! parallel and writes the SVG and a JSON run report.

pub mod cli;
pub mod io;
pub mod run;
pub mod solver;

pub use blocksets_core as core;
