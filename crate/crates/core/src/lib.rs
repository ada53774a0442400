//! Privacy/explainability trade-off benchmarking for tabular anomaly detection.
//!
//! The crate fits Isolation Forest and Local Outlier Factor detectors on clean
//! and Laplace/Gaussian input-perturbed data, attributes anomaly scores with
//! Kernel SHAP (exact enumeration for small dimensionality), and measures both
//! detection degradation (AUC, precision, fidelity) and explanation drift
//! (ShapGAP-Euclidean, ShapGAP-Cosine, ShapLength) across a privacy-budget
//! sweep.
//!
//! Module map:
//! - [`data`]: CSV ingestion, descriptors, standardization, synthetic benchmarks
//! - [`dp`]: noise calibration and input perturbation mechanisms
//! - [`models`]: isolation forest, LOF, thresholding, grid search
//! - [`shap`]: exact Shapley enumeration and Kernel SHAP regression
//! - [`metrics`]: detection and explanation-drift metrics
//! - [`runner`]: sweep orchestration, report and plot-data emission

pub mod data;
pub mod dp;
pub mod error;
pub mod metrics;
pub mod models;
pub mod runner;
pub mod seeds;
pub mod shap;

pub use error::{Error, Result};
