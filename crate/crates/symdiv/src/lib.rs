//! Compactly supported solutions of the divergence and symmetric divergence
//! equations.
//!
//! Given a vector field `U` with vanishing linear and angular moments on each
//! time slice, supported in a ball transported by a coarse flow, the solver
//! produces a symmetric 2-tensor `R` with `div R = U` supported in the same
//! transported ball. The construction averages cone integrals against a
//! translation weight [`TranslationWeight`]: a unit-mass radial bump whose
//! centre rides the coarse-flow trajectory, so that the solution operator
//! commutes with the approximate advective derivative.
//!
//! The key quantitative feature is the gain `|R| <~ rho |U|` in the weight
//! radius `rho`, which is what keeps repeated applications of the solver from
//! amplifying errors.

mod quad;
mod solve;
mod verify;
mod zeta;

pub use quad::gauss_legendre;
pub use solve::{
    cylinder_mask, scalar_bogovskii, symdiv_solve, SymDivOptions, SymDivSolution,
};
pub use verify::{
    approx_advective_vector, verify_advective_commutation, verify_symdiv_bounds,
    CommutationReport, SymDivBoundsReport,
};
pub use zeta::{build_zeta, SymDivError, TranslationWeight};
