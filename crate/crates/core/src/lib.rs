//! Unsupervised separation of subcutaneous (SAT) and visceral (VAT) adipose
//! tissue in abdominal CT volumes, with fat quantification in milliliters.
//!
//! The pipeline runs slice by slice:
//!
//! 1. [`preprocess`] — Hounsfield-window thresholding, disk closing, median
//!    filtering, producing a denoised binary fat mask.
//! 2. [`contour`] / [`boundary`] — skin contour extraction, a fan of rays cast
//!    toward the abdominal center, and fat→non-fat transition detection
//!    yielding SAT–VAT boundary hypotheses.
//! 3. [`mad`] — geometric outlier scores from the median absolute deviation of
//!    skin distances.
//! 4. [`hog`] / [`tsne`] / [`loop_score`] — appearance outlier scores: oriented
//!    gradient descriptors, a 2D embedding under normalized correlation
//!    distance, and local outlier probabilities.
//! 5. [`crf`] — label fusion of both score families by exact binary CRF energy
//!    minimization (s–t min-cut).
//! 6. [`partition`] — convex hull of the fused boundary, VAT inside / SAT
//!    outside, volume quantification.
//!
//! All numeric kernels are generic over the scalar type through [`Scalar`];
//! the pipeline itself runs on [`Real`]. Slices carry no cross-dependencies,
//! so [`pipeline::run_segment`] processes them on a worker pool with
//! deterministic, worker-count-independent output.

pub mod appearance;
pub mod boundary;
pub mod contour;
pub mod crf;
pub mod error;
pub mod evaluate;
pub mod grid;
pub mod hog;
pub mod kmeans;
pub mod loop_score;
pub mod mad;
pub mod maxflow;
pub mod overlay;
pub mod partition;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;
pub mod ransac;
pub mod scalar;
pub mod tsne;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type the shipped pipeline runs on.
pub type Real = f64;

/// 2D binary mask (true = fat candidate).
pub type BinarySlice = grid::Grid2<bool>;
/// 2D slice of Hounsfield intensities.
pub type IntensitySlice = grid::Grid2<i16>;
/// Boundary hypotheses with concrete scalar coordinates.
pub type Candidates = boundary::CandidateBoundary<Real>;
