//! Flow-transported averaging weight backing the symmetric-divergence solver.
//!
//! The weight is a fixed radial bump of unit mass, recentred at every time
//! slice on the trajectory of its initial centre under the coarse velocity.
//! Because the translation velocity is spatially constant at each time, the
//! weight is annihilated by the approximate advective derivative
//! `d/dt + v_bar(t) . grad` by construction.

use fields_core::{Grid, ScalarField};
use flow_geometry::FlowMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymDivError {
    #[error("weight radius {rho} under-resolved: needs at least {min} (2 cells)")]
    UnderResolved { rho: f64, min: f64 },
    #[error("weight centre trajectory leaves the grid inside its time window")]
    CenterEscape,
    #[error("time window contains no grid slices")]
    EmptyWindow,
    #[error(
        "moment defect beyond tolerance at slice {it}: linear {linear:?}, angular {angular:?} \
         (tolerances {lin_tol:.3e} / {ang_tol:.3e})"
    )]
    MomentDefect {
        it: usize,
        linear: [f64; 3],
        angular: [f64; 3],
        lin_tol: f64,
        ang_tol: f64,
    },
    #[error("input supported outside the weight's cylinder at slice {it} ({count} nodes)")]
    SupportViolation { it: usize, count: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Field(#[from] fields_core::FieldError),
}

/// Radial profile `(1 - |u|^2)^4` of the averaging bump, `u = r / rho`.
#[inline]
pub(crate) fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        let w = 1.0 - s2;
        let w2 = w * w;
        w2 * w2
    }
}

/// Unit-mass averaging weight transported along one coarse-flow trajectory.
pub struct TranslationWeight {
    grid: Arc<Grid>,
    rho: f64,
    tau: f64,
    t_center: f64,
    it_lo: usize,
    /// Per-slice transported centre, indexed from `it_lo`.
    centers: Vec<[f64; 3]>,
    /// Per-slice normalization making the lattice mass exactly one.
    norms: Vec<f64>,
    /// Per-slice coarse velocity at the centre (the translation velocity).
    v_bar: Vec<[f64; 3]>,
    /// Measured sup-norm constants `sup|grad^b zeta| * rho^(3+b)` for b = 0, 1.
    pub bound_constants: [f64; 2],
}

/// Build the weight for the space-time cylinder of half-width `tau` and
/// radius `rho` around `(t_center, x_center)`, following `flow`.
pub fn build_zeta(
    flow: &FlowMap,
    t_center: f64,
    x_center: [f64; 3],
    tau: f64,
    rho: f64,
) -> Result<TranslationWeight, SymDivError> {
    let g = flow.grid().clone();
    let min = 2.0 * g.dx(0).max(g.dx(1)).max(g.dx(2));
    if rho < min {
        return Err(SymDivError::UnderResolved { rho, min });
    }

    // Grid slices intersecting the time window, clamped to the grid range.
    let slack = 1e-9 * g.dt();
    let mut window: Vec<usize> = (0..g.nt)
        .filter(|&it| (g.t(it) - t_center).abs() <= tau + slack)
        .collect();
    window.sort_unstable();
    if window.is_empty() {
        return Err(SymDivError::EmptyWindow);
    }

    let traj = flow.trajectory_at_slices(t_center, x_center, tau + 2.0 * slack);
    let mut centers = vec![None; window.len()];
    let it_lo = window[0];
    for (it, pos) in traj {
        if it >= it_lo && it <= *window.last().unwrap() {
            centers[it - it_lo] = Some(pos);
        }
    }
    // Every slice of the window must be reached; a gap means the centre
    // escaped the grid mid-window.
    let centers: Vec<[f64; 3]> = centers
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(SymDivError::CenterEscape)?;

    let rho2 = rho * rho;
    let mut norms = Vec::with_capacity(centers.len());
    let mut v_bar = Vec::with_capacity(centers.len());
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for (k, &c) in centers.iter().enumerate() {
        let mut mass = 0.0;
        let mut sup = 0.0f64;
        let mut sup_grad = 0.0f64;
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            let d = g.displacement([g.x(0, ix), g.x(1, iy), g.x(2, iz)], c);
            let s2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / rho2;
            if s2 >= 1.0 {
                continue;
            }
            let b = bump(s2);
            mass += g.quad_weight(s) * b;
            sup = sup.max(b);
            let w = 1.0 - s2;
            let gb = 8.0 * (s2.sqrt() / rho) * w * w * w;
            sup_grad = sup_grad.max(gb);
        }
        if mass <= 0.0 {
            return Err(SymDivError::UnderResolved { rho, min });
        }
        let norm = 1.0 / mass;
        norms.push(norm);
        v_bar.push(flow.velocity().sample(g.t(it_lo + k), c));
        c0 = c0.max(norm * sup * rho2 * rho);
        c1 = c1.max(norm * sup_grad * rho2 * rho2);
    }

    Ok(TranslationWeight {
        grid: g,
        rho,
        tau,
        t_center,
        it_lo,
        centers,
        norms,
        v_bar,
        bound_constants: [c0, c1],
    })
}

impl TranslationWeight {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_center(&self) -> f64 {
        self.t_center
    }

    /// Slice range `[lo, hi]` covered by the weight's time window.
    pub fn window(&self) -> (usize, usize) {
        (self.it_lo, self.it_lo + self.centers.len() - 1)
    }

    pub fn in_window(&self, it: usize) -> bool {
        it >= self.it_lo && it < self.it_lo + self.centers.len()
    }

    /// Transported centre at slice `it` (must be inside the window).
    pub fn center(&self, it: usize) -> [f64; 3] {
        self.centers[it - self.it_lo]
    }

    /// Translation velocity (coarse velocity at the centre) at slice `it`.
    pub fn v_bar(&self, it: usize) -> [f64; 3] {
        self.v_bar[it - self.it_lo]
    }

    /// Weight value at slice `it`. Positions are taken modulo periodicity.
    pub fn eval(&self, it: usize, x: [f64; 3]) -> f64 {
        if !self.in_window(it) {
            return 0.0;
        }
        let d = self.grid.displacement(x, self.center(it));
        let s2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (self.rho * self.rho);
        self.norms[it - self.it_lo] * bump(s2)
    }

    /// Spatial gradient of the weight at slice `it`.
    pub fn grad(&self, it: usize, x: [f64; 3]) -> [f64; 3] {
        if !self.in_window(it) {
            return [0.0; 3];
        }
        let rho2 = self.rho * self.rho;
        let d = self.grid.displacement(x, self.center(it));
        let s2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / rho2;
        if s2 >= 1.0 {
            return [0.0; 3];
        }
        let w = 1.0 - s2;
        let f = self.norms[it - self.it_lo] * 4.0 * w * w * w * (-2.0 / rho2);
        [f * d[0], f * d[1], f * d[2]]
    }

    /// Value and gradient in centre-relative coordinates (`d = x - centre`).
    #[inline]
    pub(crate) fn eval_rel(&self, k: usize, d: [f64; 3]) -> (f64, [f64; 3]) {
        let rho2 = self.rho * self.rho;
        let s2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / rho2;
        if s2 >= 1.0 {
            return (0.0, [0.0; 3]);
        }
        let w = 1.0 - s2;
        let w3 = w * w * w;
        let n = self.norms[k];
        let f = n * 4.0 * w3 * (-2.0 / rho2);
        (n * w3 * w, [f * d[0], f * d[1], f * d[2]])
    }

    /// Lattice mass of the weight at slice `it` (one by construction).
    pub fn mass(&self, it: usize) -> f64 {
        let g = &self.grid;
        (0..g.slice_len())
            .map(|s| {
                let (ix, iy, iz) = g.spatial_coords(s);
                g.quad_weight(s) * self.eval(it, [g.x(0, ix), g.x(1, iy), g.x(2, iz)])
            })
            .sum()
    }

    /// The weight sampled on the full grid (zero outside its window).
    pub fn as_field(&self) -> ScalarField {
        let g = self.grid.clone();
        let mut f = ScalarField::zeros(&g);
        for it in self.it_lo..self.it_lo + self.centers.len() {
            for s in 0..g.slice_len() {
                let (ix, iy, iz) = g.spatial_coords(s);
                let v = self.eval(it, [g.x(0, ix), g.x(1, iy), g.x(2, iz)]);
                if v != 0.0 {
                    f.set(it, ix, iy, iz, v);
                }
            }
        }
        f
    }
}
