//! Edge-of-Chaos curves, variance rescaling for sparse and low-rank layers,
//! and exact NNGP posterior regression.

mod eoc;
mod nngp;
mod rescale;

pub use eoc::{
    chi1, eoc_solve, fixed_point, variance_map, write_eoc_csv, EocOptions, EocPoint, FixedPointOptions, EOC_BRACKET,
};
pub use nngp::{nngp_regress, NngpArch, NngpProblem, PosteriorResult};
pub use rescale::{effective_variance, EffectiveFamily, EffectiveVariance};
