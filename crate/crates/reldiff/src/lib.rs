pub mod compensated;
pub mod framebundle;
pub mod harness;
pub mod manifold;
pub mod minkowski;
pub mod processes;
pub mod rng;
pub mod stats;
