//! Finite-width forward passes and Monte-Carlo ensembles over independent
//! initialisations.

mod cnn;
mod config;
mod ensemble;
mod fcn;

pub use cnn::{forward_cnn, sample_cnn_weights, ConvNetworkWeights};
pub use config::{Architecture, NetworkConfig, Probe};
pub use ensemble::{run_ensemble, sample_sphere, EnsembleTable, Inputs};
pub use fcn::{forward_fcn, sample_fcn_weights, NetworkWeights};
