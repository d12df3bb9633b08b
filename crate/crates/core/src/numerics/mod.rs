//! Quadrature, root finding and deterministic Monte Carlo shared by the
//! higher-level modules.

mod montecarlo;
mod quadrature;
mod rng;
mod root;

pub use montecarlo::{
    mc_estimate, mc_estimate_vec, mc_estimate_vec_with_workers, mc_estimate_with_workers, McEstimate, DEFAULT_CHUNK,
    DEFAULT_SAMPLES,
};
pub use quadrature::{integrate, integrate_with, QuadOptions, Quadrature, DEFAULT_REL_TOL};
pub use rng::{RandomStream, StreamRng, DRAWS_PER_COUNTER};
pub use root::{find_root, DEFAULT_ROOT_TOL};
