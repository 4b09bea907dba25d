//! Phase functions carried by the coarse flow.
//!
//! A phase is born linear, `ξ̂(x) = d·(x − x_b)` with `|d| = 1`, and is
//! extended off its birth slice by the backward pullback
//! `ξ(t,x) = ξ̂(Φ'_{t_b − t}(t,x))`, which is the exact solution of the
//! advective transport equation.  Its gradient is the Jacobian pullback
//! `(∇Φ')ᵀ d` and starts with unit length; the construction only remains
//! usable while the gradient stays near its birth value, so the sup drift
//! `‖∇ξ − d‖∞` is measured and a ceiling is enforced.

use fields_core::{ScalarField, VectorField};
use flow_geometry::FlowMap;
use rayon::prelude::*;
use std::sync::Arc;

use crate::{backmap::BackwardMap, WaveError};

pub struct PhaseFunction {
    /// Birth direction `d = ∇ξ̂`, unit length.
    pub dir: [f64; 3],
    /// Birth time and the point where the phase vanishes at birth.
    pub birth: (f64, [f64; 3]),
    /// `ξ` on the window slices (zero elsewhere).
    pub xi: ScalarField,
    /// Cached `∇ξ` on the window slices.
    pub grad: VectorField,
    /// Inclusive slice range on which the phase is defined.
    pub window: (usize, usize),
    /// Measured `sup |∇ξ − d|` over interior window nodes.
    pub drift: f64,
    /// Shared pullback used to build this phase.
    pub back: Arc<BackwardMap>,
}

impl PhaseFunction {
    /// Build a phase from a precomputed pullback map, sharing the map with
    /// other phases and cutoffs born at the same slice.
    pub fn from_back_map(
        back: &Arc<BackwardMap>,
        dir: [f64; 3],
        birth_x: [f64; 3],
        c0: f64,
    ) -> Result<Self, WaveError> {
        let g = back.grid().clone();
        let (lo, hi) = back.window();
        let sl = g.slice_len();
        let mut xi = ScalarField::zeros(&g);
        let mut grad = VectorField::zeros(&g);
        for it in lo..=hi {
            let vals: Vec<(f64, [f64; 3])> = (0..sl)
                .into_par_iter()
                .map(|s| {
                    let (ix, iy, iz) = g.spatial_coords(s);
                    let y = back.position(it, ix, iy, iz);
                    let v = dir[0] * (y[0] - birth_x[0])
                        + dir[1] * (y[1] - birth_x[1])
                        + dir[2] * (y[2] - birth_x[2]);
                    (v, back.pullback_gradient(it, ix, iy, iz, dir))
                })
                .collect();
            for (s, (v, gr)) in vals.into_iter().enumerate() {
                let (ix, iy, iz) = g.spatial_coords(s);
                xi.set(it, ix, iy, iz, v);
                grad.set(it, ix, iy, iz, gr);
            }
        }
        // Drift over interior nodes: the Jacobian stencil rows touching the
        // zero extension of a bounded axis are meaningless, as are escaped
        // trajectories.
        let margin = 2usize;
        let mut drift: f64 = 0.0;
        for it in lo..=hi {
            let slice_drift = (0..sl)
                .into_par_iter()
                .map(|s| {
                    let (ix, iy, iz) = g.spatial_coords(s);
                    for (a, &i) in [ix, iy, iz].iter().enumerate() {
                        if !g.periodic[a] && (i < margin || i + margin >= g.n[a]) {
                            return 0.0;
                        }
                    }
                    if back.is_dead(it, ix, iy, iz) {
                        return 0.0;
                    }
                    let gr = grad.at(it, ix, iy, iz);
                    ((gr[0] - dir[0]).powi(2)
                        + (gr[1] - dir[1]).powi(2)
                        + (gr[2] - dir[2]).powi(2))
                    .sqrt()
                })
                .reduce(|| 0.0, f64::max);
            drift = drift.max(slice_drift);
        }
        if drift > c0 {
            return Err(WaveError::Drift { drift, limit: c0 });
        }
        Ok(PhaseFunction {
            dir,
            birth: (back.birth_t(), birth_x),
            xi,
            grad,
            window: (lo, hi),
            drift,
            back: back.clone(),
        })
    }

    pub fn in_window(&self, it: usize) -> bool {
        it >= self.window.0 && it <= self.window.1
    }
}

/// Transport a unit direction `d` from `birth = (t_b, x_b)` along the flow
/// of `v`, for `|t − t_b| ≤ lifespan`.  Fails if the gradient drifts by
/// more than `c0` anywhere on the window interior.
pub fn transport_phase(
    dir: [f64; 3],
    birth: (f64, [f64; 3]),
    flow: &FlowMap,
    lifespan: f64,
    c0: f64,
) -> Result<PhaseFunction, WaveError> {
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    assert!(
        (norm - 1.0).abs() < 1e-12,
        "phase directions must be unit vectors"
    );
    let back = Arc::new(BackwardMap::new(flow, birth.0, lifespan)?);
    PhaseFunction::from_back_map(&back, dir, birth.1, c0)
}
