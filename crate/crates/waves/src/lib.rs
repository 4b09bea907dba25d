//! High-frequency incompressible wave corrections.
//!
//! A correction is a sum of compactly supported waves
//! `V_I = ∇×∇×(λ⁻² e^{iλξ_I} y_I)`, each indexed by a space-time lattice
//! cell and one of twelve oscillation directions.  The pieces:
//!
//! * [`DodecahedralFrame`] — the direction set and its rotation family,
//!   with a verified separation bound between neighboring cells;
//! * [`transport_phase`] — phases carried by the coarse flow, with unit
//!   gradients at birth and a hard ceiling on gradient drift;
//! * [`build_cutoffs`] — quadratic partitions of unity in time and in
//!   transported space coordinates that localize each wave;
//! * [`solve_gamma`] — per-node amplitude magnitudes solving the quadratic
//!   system that makes the low-frequency part of the quadratic stress
//!   cancel a prescribed tensor;
//! * [`build_amplitude`] / [`assemble_wave`] — complex amplitudes
//!   orthogonal to the phase gradient (a microlocal curl eigenfunction
//!   ansatz) and the exactly divergence-free double-curl wave;
//! * [`build_ensemble`] — the full correction over all live indices, with
//!   its stress-cancellation residual and interaction diagnostics.

mod amplitude;
mod assemble;
mod backmap;
mod checks;
mod cutoffs;
mod ensemble;
mod frame;
mod gamma;
mod phase;

use thiserror::Error;

pub use amplitude::{build_amplitude, WaveAmplitude, WaveConfig, WaveIndex};
pub use assemble::{assemble_wave, real_correction, Wave};
pub use backmap::BackwardMap;
pub use checks::{
    check_limited_interactions, check_nonstationary_phase, support_mask, InteractionReport,
    NonstationaryPhaseReport,
};
pub use cutoffs::{build_cutoffs, eta_profile, CutoffSystem};
pub use ensemble::{build_ensemble, EnsembleInput, WaveEnsemble};
pub use frame::{
    companion_face, conjugate_face, face_directions, init_frame, search_frame, DodecahedralFrame,
    PHI,
};
pub use gamma::{solve_gamma, solve_gamma_node, GammaSolution};
pub use phase::{transport_phase, PhaseFunction};

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("rotation search reached separation {achieved:.4}, below the floor {floor:.4}")]
    FrameSeparation { achieved: f64, floor: f64 },
    #[error("frame data file is invalid: {0}")]
    FrameFile(String),
    #[error("scale under-resolved: {what} = {value:.3e} needs at least {min:.3e}")]
    UnderResolved {
        what: &'static str,
        value: f64,
        min: f64,
    },
    #[error("no grid time slices fall inside the requested window around t = {birth}")]
    EmptyWindow { birth: f64 },
    #[error("phase gradient drifted by {drift:.3e}, over the ceiling {limit:.3e}; shorten the lifespan")]
    Drift { drift: f64, limit: f64 },
    #[error("energy floor violated at t-slice {it}, x = {x:?}: squared amplitude {value:.3e} is not positive")]
    EnergyFloor { it: usize, x: [f64; 3], value: f64 },
    #[error("amplitude solve failed to converge: residual {residual:.3e} at t-slice {it}, x = {x:?}")]
    GammaConvergence { it: usize, x: [f64; 3], residual: f64 },
    #[error("nonstationary phase failure: |∇ξ| = {value:.3e} fell below 1/{floor:.1} on a wave support")]
    PhaseFloor { value: f64, floor: f64 },
    #[error("prescribed tensor too large: sup |ε| = {value:.3e} exceeds the solvability radius {radius:.3e}")]
    EpsTooLarge { value: f64, radius: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Field(#[from] fields_core::FieldError),
}
