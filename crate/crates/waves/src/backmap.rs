//! Backward flow pullback shared by phases and space cutoffs.
//!
//! Everything transported from a birth slice `t_b` is a composition
//! `q(Φ'_{t_b - t}(t, x))` with the same map, so the map is materialized
//! once per birth time: for every node of every slice in the window, the
//! position the coarse flow carries it back to at `t_b`.  A discrete
//! spatial Jacobian of the map is cached for phase gradients.

use fields_core::{deriv::gradient, Grid, ScalarField, VectorField};
use flow_geometry::{FlowMap, SpaceTimeMask};
use rayon::prelude::*;
use std::sync::Arc;

use crate::WaveError;

pub struct BackwardMap {
    grid: Arc<Grid>,
    birth_t: f64,
    window: (usize, usize),
    /// `Φ'_{t_b - t}(t, x)` at each window node; the node's own position
    /// outside the window or where the trajectory escapes the box.
    pos: VectorField,
    /// `∇(pos − x)`: `jac[m]` is the spatial gradient of displacement
    /// component `m`.  The displacement is periodic whenever the velocity
    /// is, so differentiating it (rather than the raw position, which
    /// jumps by a box length across a periodic wrap) keeps the stencil
    /// honest on periodic axes; the identity part is added back in
    /// [`BackwardMap::pullback_gradient`].
    jac: [VectorField; 3],
    /// Nodes whose backward trajectory left the box: transported
    /// quantities are undefined there and cutoffs treat them as zero.
    dead: SpaceTimeMask,
}

impl BackwardMap {
    pub fn new(flow: &FlowMap, birth_t: f64, lifespan: f64) -> Result<Self, WaveError> {
        let g = flow.grid().clone();
        let slack = 1e-9 * g.dt();
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        for it in 0..g.nt {
            if (g.t(it) - birth_t).abs() <= lifespan + slack {
                lo = lo.min(it);
                hi = hi.max(it);
            }
        }
        if lo == usize::MAX {
            return Err(WaveError::EmptyWindow { birth: birth_t });
        }
        let sl = g.slice_len();
        let mut pos = VectorField::from_fn(&g, |_, x| x);
        let mut dead = SpaceTimeMask::empty(&g);
        for it in lo..=hi {
            let t = g.t(it);
            let results: Vec<Option<[f64; 3]>> = (0..sl)
                .into_par_iter()
                .map(|s| {
                    let x = g.node_pos(s);
                    flow.flow_spatial(t, x, birth_t - t).ok()
                })
                .collect();
            for (s, r) in results.into_iter().enumerate() {
                let (ix, iy, iz) = g.spatial_coords(s);
                match r {
                    Some(y) => pos.set(it, ix, iy, iz, y),
                    None => dead.set(it, ix, iy, iz, true),
                }
            }
        }
        let mut disp = pos.clone();
        disp.axpy(-1.0, &VectorField::from_fn(&g, |_, x| x));
        let jac = [
            gradient(&disp.component(0)),
            gradient(&disp.component(1)),
            gradient(&disp.component(2)),
        ];
        Ok(BackwardMap {
            grid: g,
            birth_t,
            window: (lo, hi),
            pos,
            jac,
            dead,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn birth_t(&self) -> f64 {
        self.birth_t
    }

    /// Inclusive slice range covered by the map.
    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    pub fn in_window(&self, it: usize) -> bool {
        it >= self.window.0 && it <= self.window.1
    }

    pub fn position(&self, it: usize, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        self.pos.at(it, ix, iy, iz)
    }

    pub fn is_dead(&self, it: usize, ix: usize, iy: usize, iz: usize) -> bool {
        self.dead.get(it, ix, iy, iz)
    }

    /// Pullback gradient `(∇Φ')ᵀ d` of a covector `d` at the birth slice.
    pub fn pullback_gradient(
        &self,
        it: usize,
        ix: usize,
        iy: usize,
        iz: usize,
        d: [f64; 3],
    ) -> [f64; 3] {
        let mut out = d;
        for (m, dm) in d.iter().enumerate() {
            let gm = self.jac[m].at(it, ix, iy, iz);
            for j in 0..3 {
                out[j] += dm * gm[j];
            }
        }
        out
    }

    /// Scalar pullback `q(Φ')` of a birth-slice function, zero off-window.
    pub fn pullback(&self, q: impl Fn([f64; 3]) -> f64 + Sync) -> ScalarField {
        let g = &self.grid;
        let sl = g.slice_len();
        let mut out = ScalarField::zeros(g);
        for it in self.window.0..=self.window.1 {
            let vals: Vec<f64> = (0..sl)
                .into_par_iter()
                .map(|s| {
                    let (ix, iy, iz) = g.spatial_coords(s);
                    if self.dead.get(it, ix, iy, iz) {
                        0.0
                    } else {
                        q(self.pos.at(it, ix, iy, iz))
                    }
                })
                .collect();
            for (s, v) in vals.into_iter().enumerate() {
                let (ix, iy, iz) = g.spatial_coords(s);
                out.set(it, ix, iy, iz, v);
            }
        }
        out
    }
}
