//! Sampled fields on a space-time box and the discrete calculus used by the
//! rest of the workspace.
//!
//! A [`Grid`] discretizes `[t0,t1] x [x0,x1]^3` with uniform spacing; axes may
//! be periodic (endpoints identified) or bounded.  Fields store one `f64` per
//! node per component in `(t, z, y, x, component)` row-major order, which is
//! also the snapshot wire format.  Spatial derivatives are 4th-order central
//! differences (one-sided at bounded-axis edges); time derivatives are
//! 2nd-order.  Integrals are product trapezoid sums.
//!
//! The module also provides the Euler–Reynolds residual, frequency-energy
//! level estimation, and the linear/angular momentum functionals that gate
//! compactly supported divergence solves.

pub mod deriv;
pub mod field;
pub mod grid;
pub mod levels;
pub mod momentum;
pub mod snapshot;

pub use deriv::{
    advective_derivative_scalar, advective_derivative_tensor, advective_derivative_vector, curl,
    deriv_axis, divergence, gradient, sym_div, time_derivative,
};
pub use field::{ComplexVectorField, ScalarField, SymmetricTensorField, VectorField};
pub use grid::Grid;
pub use levels::{
    check_levels, derivative_sup_norms, estimate_levels, euler_reynolds_residual,
    FrequencyEnergyLevels,
};
pub use momentum::momentum_functionals;

use std::sync::Arc;

/// A sampled Euler–Reynolds state `(v, p, R)` with its declared levels.
#[derive(Clone)]
pub struct EulerReynoldsState {
    pub v: VectorField,
    pub p: ScalarField,
    pub r: SymmetricTensorField,
    pub levels: FrequencyEnergyLevels,
}

impl EulerReynoldsState {
    pub fn grid(&self) -> &Arc<Grid> {
        self.v.grid()
    }

    /// Zero state on `grid` with placeholder levels.
    pub fn zero(grid: &Arc<Grid>) -> Self {
        EulerReynoldsState {
            v: VectorField::zeros(grid),
            p: ScalarField::zeros(grid),
            r: SymmetricTensorField::zeros(grid),
            levels: FrequencyEnergyLevels {
                xi: 2.0,
                e_v: 1.0,
                e_r: 1.0,
                order: 2,
            },
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("grids do not match")]
    GridMismatch,
    #[error("operation needs at least {need} time slices, grid has {have}")]
    TooFewSlices { need: usize, have: usize },
    #[error("angular momentum is undefined on a periodic grid")]
    PeriodicAngular,
    #[error("{0}")]
    Invalid(String),
}
