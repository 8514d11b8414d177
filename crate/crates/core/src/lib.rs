//! Symbolic abstraction of control systems on box grids.

pub mod abstraction;
pub mod depgraph;
pub mod encoding;
pub mod geometry;
pub mod reach;
pub mod synthesis;
pub mod models;
