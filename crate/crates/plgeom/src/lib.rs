//! Geometric core for plane/line-prior depth estimation.
//!
//! Scene geometry is parameterized by per-pixel planar coefficients whose dot
//! product with the normalized image coordinate gives inverse depth. On top of
//! that sit random-sample planar/linear consistency losses, graph-based
//! pseudo-plane extraction, flatness/straightness evaluation metrics, and a
//! synthetic outlier-robustness benchmark comparing random-sample consistency
//! against least-square plane fitting.

pub mod camera;
pub mod coeffs;
pub mod eval;
pub mod losses;
pub mod pfm;
pub mod raster;
pub mod regions;
pub mod robustness;
pub mod segment;
pub mod textio;
pub mod view;

mod parallel;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
