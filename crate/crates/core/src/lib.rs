//! Algorithms behind BlockSets visualizations.
//!
//! A set system whose elements carry large rectangular content is laid out on
//! a grid, every set gets an orthoconvex enclosing shape, inputs that do not
//! lay out compactly are split into parts, and the resulting shapes are
//! stacked and colored so that each one stays recognizable when painted
//! opaquely.
//!
//! The crate is `no_std` and only needs `alloc`. Anything that touches files,
//! clocks or an actual MILP solver lives in the `blocksets` crate; the
//! optimization steps here are generic over [`milp::MilpSolver`].

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod arranger;
pub mod color;
pub mod geometry;
pub mod layout;
pub mod milp;
pub mod model;
pub mod pipeline;
pub mod render;
pub mod splitter;
pub mod stacker;
pub mod warmstart;

pub use model::{Cell, CellSet, ElementId, GridLayout, SetId, SetSystem, ShapeClass};
