//! Sparse assembly, band factorizations and eigensolvers.

pub mod banded;
pub mod eigen;
pub mod sparse;
