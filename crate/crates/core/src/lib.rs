//! Reconstruction of harmonic potentials on an inner sphere from global data on
//! an outer sphere combined with local data on a spherical cap, using a scaling
//! kernel and a cap-localized wavelet kernel whose symbols are obtained jointly
//! from a quadratic minimization problem.

pub mod error;
pub mod harmonics;
pub mod kernels;
pub mod legendre;
pub mod transforms;
pub mod vector_field;
pub mod experiments;

pub use error::{Error, Result};
