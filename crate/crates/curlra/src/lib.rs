//! Superfast (sublinear-cost) CUR / pseudo-skeleton low-rank approximation.
//!
//! The crate provides:
//!
//! - a dense matrix substrate over real and complex doubles with SVD,
//!   pseudo-inverse, and matrix volumes ([`mat`], [`svd`]);
//! - generators for the random and benchmark input families used by the
//!   experiment harness ([`gen`]);
//! - CUR factorizations with canonical nuclei and a priori / a posteriori
//!   error estimation ([`skeleton`]);
//! - volume-maximization machinery: dominant submatrices, greedy expansion,
//!   projective-volume and strong rank-revealing selection ([`maxvol`]);
//! - end-to-end pipelines: primitive, cynical, cross-approximation,
//!   leverage-score CUR, and LRA/SVD/CUR conversions ([`pipelines`]);
//! - randomized multiplicative pre-processors: Gaussian, SRHT/SRFT, abridged
//!   Hadamard/Fourier, and quasi-Gaussian bidiagonal products ([`preprocess`]);
//! - an experiment harness with CSV reports behind the `curlra` CLI
//!   ([`harness`]).

pub mod error;
pub mod gen;
pub mod harness;
pub mod io;
pub mod mat;
pub mod maxvol;
pub mod pipelines;
pub mod preprocess;
pub mod qr;
pub mod rng;
pub mod scalar;
pub mod skeleton;
pub mod stats;
pub mod svd;

pub use error::{Error, Result};
pub use mat::{AnyMat, IndexSet, Mat, NormKind};
pub use scalar::Scalar;
pub use skeleton::CurLra;
pub use svd::{SvdScalar, TopSvd};
