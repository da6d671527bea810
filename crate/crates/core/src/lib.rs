//! Pseudo-iid weight ensembles and their wide-network Gaussian limits.
//!
//! The crate is organised around the pipeline used to check that finite,
//! randomly initialised networks converge to their NNGP limit:
//!
//! * [`weights`] draws seeded weight matrices and convolution filters from
//!   iid, orthogonal, low-rank and block-sparse families;
//! * [`regime`] estimates the exchangeability and moment conditions those
//!   families are expected to satisfy;
//! * [`kernel`] computes the limiting covariance for fully connected and
//!   convolutional networks;
//! * [`propagate`] runs finite-width networks over many initialisations;
//! * [`stats`] compares ensembles with their Gaussian limits;
//! * [`analysis`] builds Edge-of-Chaos curves and NNGP posteriors on top of
//!   the kernels.

pub mod analysis;
pub mod error;
pub mod image;
pub mod kernel;
pub mod propagate;
pub mod regime;
pub mod rng;
pub mod stats;
pub mod weights;

mod par;

pub use error::{Error, Result};
pub use image::Image;
pub use rng::RngSeed;

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
