//! Spectral variable selection toolkit.
//!
//! Compresses spectra onto a uniform-knot B-spline basis (size chosen by a
//! leave-one-out criterion), selects informative coefficients by kNN mutual
//! information with a forward-backward search, maps them back to wavelength
//! ranges, and fits RBFN / linear / latent-variable prediction models
//! compared by normalized mean squared error.

// NaN-rejecting validations (`!(x > 0.0)`) and index-based loops over banded
// structures read better here than the iterator rewrites clippy suggests.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bspline;
pub mod linalg;
pub mod mi;
pub mod models;
pub mod pipeline;
pub mod selection;
pub mod spectra;
