//! Preprocessor for immersed finite element analysis.
//!
//! Given a structured background mesh carrying a tensor-product B-spline
//! basis and a list of implicitly defined geometries, the pipeline
//! tessellates cut elements into an interface-conforming foreground mesh,
//! builds material topology graphs, performs generalized Heaviside
//! enrichment by unzipping background elements, and emits integration
//! clusters (element + custom quadrature rule) for bulk, boundary,
//! interface, and ghost-stabilization terms. A simulated distributed
//! decomposition with globally consistent IDs and a small verification
//! assembler round out the crate.

pub mod bg_mesh;
pub mod enrichment;
pub mod clusters;
pub mod error;
pub mod geometry;
pub mod parallel;
pub mod quadrature;
pub mod tessellation;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};

/// Seeded RNG used by the experiments and the randomized test suites.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
