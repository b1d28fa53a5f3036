//! Frequency windows and transition rates for spatially extended
//! Unruh–DeWitt detectors.
//!
//! The crate is layered bottom-up: [`specfun`] and [`quadrature`] are the
//! numerical kernels, [`profiles`] builds smearing functions and their
//! frequency windows, [`detector`] evaluates vacuum and particle transition
//! rates, and [`io`] holds the config parser, sweep runner and figure presets
//! used by the `udw` binary.

pub mod detector;
pub mod error;
pub mod io;
pub mod profiles;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
