//! Limiting NNGP covariances for fully connected and convolutional networks.

mod activation;
mod cnn;
mod fcn;
mod pair;
mod quadrature;

pub use activation::{Activation, ActivationKind, CustomActivation};
pub use cnn::{kernel_cnn, patch, ConvKernelTable, PatchEntry};
pub use fcn::{kernel_fcn, kernel_step, project_psd, KernelTable, PSD_FLOOR};
pub use pair::{derivative_second_moment, pair_expectation, QuadratureOptions};
pub use quadrature::{expect_standard, gauss_hermite, gauss_legendre, Rule, DEFAULT_ORDER, TAIL};

pub(crate) use cnn::check_kernel_size;

