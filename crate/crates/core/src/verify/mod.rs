//! Small verification assembler consuming clusters.
//!
//! Supports 2D scalar diffusion and plane-stress linear elasticity with
//! Nitsche-type weak Dirichlet and interface conditions and face-oriented
//! ghost penalties on the normal-derivative jumps up to the basis degree.
//! Systems are assembled dense over the enriched basis indices and solved
//! directly; condition numbers come from a dense SVD. This is a
//! verification harness, not a production solver.

mod assemble;
mod experiments;
mod solve;

pub use assemble::{
    assemble, eval_solution, eval_solution_grad, eval_stress, AssembledSystem,
    SurfaceSelector, VerifySetup,
};
pub use experiments::{
    brickwall_input, check_pipeline_invariants, multibeam_input, run_brickwall_experiment_2d,
    run_ghost_offset_sweep, run_multibeam_experiment, BrickwallConfig, BrickwallReport,
    GhostSweepConfig, GhostSweepReport, MultibeamConfig, MultibeamReport, BRICKWALL_H,
};
pub use solve::{l2_h1_errors, solve_and_measure, SolveReport};

/// Physics assembled from the clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Physics {
    Diffusion,
    PlaneStress,
}

impl Physics {
    pub fn components(self) -> usize {
        match self {
            Physics::Diffusion => 1,
            Physics::PlaneStress => 2,
        }
    }
}

/// Per-material constitutive parameters. For diffusion, `e` acts as the
/// conductivity and `nu` is ignored.
#[derive(Debug, Clone, Copy)]
pub struct MaterialParams {
    pub e: f64,
    pub nu: f64,
    pub void: bool,
}

impl MaterialParams {
    pub fn solid(e: f64, nu: f64) -> Self {
        MaterialParams { e, nu, void: false }
    }

    pub fn void() -> Self {
        MaterialParams {
            e: 0.0,
            nu: 0.0,
            void: true,
        }
    }
}

/// Nitsche parameters: penalty scale beta (gamma = beta * E_eff / h) and
/// the symmetry sign of the adjoint-consistency term.
#[derive(Debug, Clone, Copy)]
pub struct NitscheParams {
    pub beta: f64,
    pub symmetric: bool,
}

impl NitscheParams {
    pub fn for_degree(p: usize) -> Self {
        NitscheParams {
            beta: 2.0 * ((p + 1) * (p + 1)) as f64,
            symmetric: true,
        }
    }
}

/// Ghost penalty gamma_G^k = coeff * E * h^(2k-1) for k = 1..=degree.
#[derive(Debug, Clone, Copy)]
pub struct GhostParams {
    pub coeff: f64,
}

impl Default for GhostParams {
    fn default() -> Self {
        GhostParams { coeff: 0.01 }
    }
}
