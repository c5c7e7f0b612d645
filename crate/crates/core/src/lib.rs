//! Topological featurization of labeled 3-D point clouds.
//!
//! The crate turns point clouds (protein structures read from PDB files, or
//! synthetic shapes) into persistence diagrams, learns label-discriminating
//! regions of diagram space with cover-tree entropy reduction, vectorizes
//! diagrams against the learned Gaussian coordinates, and trains random-forest
//! classifiers on the resulting features.
//!
//! Module map:
//!
//! - [`pdb_ingest`]: PDB parsing, van der Waals weights, labeling and class balancing.
//! - [`complex`]: Vietoris–Rips and weighted alpha filtrations.
//! - [`persistence`]: boundary-matrix reduction over Z/2 and diagram transforms.
//! - [`covertree`]: leveled cover tree over planar points.
//! - [`cder`]: entropy-driven Gaussian coordinates and diagram vectorization.
//! - [`forest`]: CART random forest with MDI importances and randomized CV search.
//! - [`stats`]: average precision, Pearson r, paired t-test, splits, hexbin.
//! - [`pipeline`]: configuration, synthetic data and end-to-end orchestration.

pub mod cder;
pub mod complex;
pub mod covertree;
pub mod error;
pub mod forest;
pub mod io;
pub mod pdb_ingest;
pub mod persistence;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
