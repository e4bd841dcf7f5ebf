//! Experiment bodies. Each reads its scale from the context and appends checks.

mod geometry;
mod hitting;
mod roup;

pub use geometry::{
    anisotropy, determinism, dudley_radial_moment, frame_integrity, divergence_identity, martingale_covariance,
    rotation_invariance, scheme_equivalence,
};
pub use hitting::{hitting_density_relation, weak_form_hitting};
pub use roup::{adjoint_stationarity, entropy_decay, roup_juttner};
