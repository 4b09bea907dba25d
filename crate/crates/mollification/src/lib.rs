//! Moment-killing mollifiers, mollification along the flow, and the
//! regularized stress and energy density built from them.
//!
//! Spatial kernels are polynomial bumps sampled on the grid lattice with
//! their discrete mass and vanishing moments enforced exactly; the time
//! kernel of the flow mollifier lives on a 9-node trapezoid rule.  The
//! two-parameter mollifier averages a field over spatial balls carried
//! along trajectories of `∂_t + v·∇`, which is what lets stresses and
//! energy densities keep advective-derivative bounds at limited
//! regularity.

mod kernel;
mod ops;

pub use kernel::{MollError, MollKernel};
pub use ops::{
    mollify_along_flow, mollify_space, mollify_space_tensor, mollify_space_vector,
    regularize_energy, regularize_stress, verify_moll_estimates, FlowMollifier,
    MollEstimateEntry, MollEstimateReport,
};

// Advective derivatives act on mollified fields all over this crate's
// call sites; re-export the stencil versions so callers need one import.
pub use fields_core::{
    advective_derivative_scalar, advective_derivative_tensor, advective_derivative_vector,
};
