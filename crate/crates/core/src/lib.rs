//! Concept-drift detection on streams with missing values.
//!
//! The crate is organised along the pipeline it implements:
//!
//! - [`streamgen`]: synthetic feature distributions, label-flip drift streams and
//!   MCAR/MAR/MNAR sparsity injection.
//! - [`missingness`]: Wald–Wolfowitz runs test on missing masks, missingness
//!   classification and imputation bias reports.
//! - [`imputation`]: mean/median/mode/zero/kNN imputers, distribution
//!   identification, per-distribution defaults and RMSE-driven imputer selection.
//! - [`detectors`]: seven online drift detectors (PH, DDM, EDDM, HDDM-A, HDDM-W,
//!   ADWIN, KSWIN).
//! - [`ensemble`]: windowed majority voting over base detectors and the ensemble
//!   risk model.
//! - [`evaluation`]: prequential harness, online Gaussian naive Bayes and
//!   detection metrics (ADD, TPR, TPD, drift count).
//! - [`experiment`]: config-driven experiment matrices, report bundles and the
//!   vote-window sweep.
//!
//! Data-parallel loops (kNN imputation, imputer candidates, experiment cells,
//! Monte-Carlo seed batches) run on rayon when the `parallel` feature is on and
//! fall back to plain iterators otherwise. See [`par`].

pub mod detectors;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod imputation;
pub mod io;
pub mod matrix;
pub mod missingness;
pub mod par;
pub mod rng;
pub mod stats;
pub mod streamgen;

pub use error::{Error, Result};
pub use matrix::{MissingMask, SparseMatrix};
