//! Utility-aware anonymization of numeric databases by principal component
//! analysis.
//!
//! The anonymizer removes principal components starting from the *largest*
//! one, rotates what is left back onto the original attributes, and measures
//! how useful the result still is. Removal continues while a
//! [`UtilityPolicy`](metrics::UtilityPolicy) is satisfied.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`; the `*F32` variants use `f32`.
//!
//! ```
//! use pcaanon_core::{anonymize, Dataset, Matrix, Metric, UtilityPolicy};
//!
//! let d = Dataset::from_matrix(Matrix::from_rows(&[
//!     [1.0, 2.1, 0.3],
//!     [2.0, 3.9, 1.0],
//!     [3.0, 6.2, -0.5],
//!     [4.0, 7.8, 0.7],
//! ]))?;
//! let policy = UtilityPolicy::new().with(Metric::Correlation, 0.5);
//! let result = anonymize(&d, &policy, None)?;
//! assert!(result.components_removed <= 2);
//! # Ok::<(), pcaanon_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod error;
pub mod imaging;
pub mod linalg;
pub mod metrics;
pub mod pca;
pub mod scalar;

pub use dataset::{column_stats, destandardize, load_csv, read_csv, standardize, write_csv};
pub use error::{Error, ErrorKind, Result};
pub use imaging::{GrayImage, Psnr, Scaling};
pub use metrics::{
    correlation, difference_matrix, evaluate, flatten_row_major, gaussian_kl, norm_frobenius,
    norm_l1_adapted, norm_sum, Metric,
};
pub use pca::{
    anonymize, anonymize_with, covariance, eig_sym, reduce, remove_top_components,
    AnonymizeOptions, Basis, StopReason,
};
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type ColumnStats = dataset::ColumnStats<f64>;
pub type StandardizedDataset = dataset::StandardizedDataset<f64>;
pub type EigenSystem = pca::EigenSystem<f64>;
pub type AnonymizationResult = pca::AnonymizationResult<f64>;
pub type HistoryEntry = pca::HistoryEntry<f64>;
pub type DifferenceMatrix = metrics::DifferenceMatrix<f64>;
pub type UtilityPolicy = metrics::UtilityPolicy<f64>;
pub type UtilityReport = metrics::UtilityReport<f64>;
pub type SigmoidFit = imaging::SigmoidFit<f64>;

pub type MatrixF32 = linalg::Matrix<f32>;
pub type DatasetF32 = dataset::Dataset<f32>;
pub type UtilityPolicyF32 = metrics::UtilityPolicy<f32>;
pub type SigmoidFitF32 = imaging::SigmoidFit<f32>;
