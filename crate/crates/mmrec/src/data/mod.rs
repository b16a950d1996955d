//! Dataset types, file format, preprocessing, splits, and the synthetic
//! generator.

pub mod types;
