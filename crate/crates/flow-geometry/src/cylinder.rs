//! Eulerian and Lagrangian cylinders adapted to a velocity field.
//!
//! An Eulerian cylinder of duration `2τ` and radius `ρ` about `(t0,x0)` is
//! the union of spatial balls of radius `ρ` carried along the trajectory
//! through `(t0,x0)`.  A Lagrangian cylinder is the union of trajectories
//! emanating from the ball of radius `ρ` about `x0` at time `t0`.  The two
//! families are dual: `q ∈ Ĉ(τ,ρ;p)` iff `p ∈ Γ̂(τ,ρ;q)`.

use crate::flow::FlowMap;
use fields_core::Grid;
use rayon::prelude::*;
use std::sync::Arc;

/// Spacetime point `(t, x)`.
pub type Point = (f64, [f64; 3]);

/// Eulerian cylinder `Ĉ_v(τ, ρ; t0, x0)`: spatial balls around a trajectory.
pub struct EulerianCylinder<'a> {
    pub flow: &'a FlowMap,
    pub tau: f64,
    pub rho: f64,
    pub center: Point,
}

/// Lagrangian cylinder `Γ̂_v(τ, ρ; t0, x0)`: trajectories from a spatial ball.
pub struct LagrangianCylinder<'a> {
    pub flow: &'a FlowMap,
    pub tau: f64,
    pub rho: f64,
    pub center: Point,
}

fn time_in_grid(g: &Grid, t: f64) -> bool {
    let slack = 1e-9 * (g.t1 - g.t0).abs().max(1.0);
    t >= g.t0 - slack && t <= g.t1 + slack
}

/// `q ∈ Ĉ(τ,ρ;center)`: flow the center to `q`'s time and test the spatial
/// distance.  A query time outside the grid interval yields `false`.
pub fn eulerian_contains(c: &EulerianCylinder, q: Point) -> bool {
    let g = c.flow.grid();
    let (t0, x0) = c.center;
    let (tq, xq) = q;
    if !time_in_grid(g, tq) {
        eprintln!("cylinder query time {tq} outside grid interval [{}, {}]", g.t0, g.t1);
        return false;
    }
    let s = tq - t0;
    if s.abs() > c.tau {
        return false;
    }
    match c.flow.flow_spatial(t0, x0, s) {
        Ok(y) => g.distance(y, xq) <= c.rho,
        Err(_) => false,
    }
}

/// `q ∈ Γ̂(τ,ρ;center)`: flow `q` backward to the center time and test the
/// distance to `x0`.
pub fn lagrangian_contains(c: &LagrangianCylinder, q: Point) -> bool {
    let g = c.flow.grid();
    let (t0, x0) = c.center;
    let (tq, xq) = q;
    if !time_in_grid(g, tq) {
        eprintln!("cylinder query time {tq} outside grid interval [{}, {}]", g.t0, g.t1);
        return false;
    }
    let s = tq - t0;
    if s.abs() > c.tau {
        return false;
    }
    match c.flow.flow_spatial(tq, xq, -s) {
        Ok(y) => g.distance(y, x0) <= c.rho,
        Err(_) => false,
    }
}

/// Boolean mask over the spacetime nodes of a grid.  Used both for seed
/// sets (supports of stresses or energy densities) and for cylinder
/// neighborhoods of such sets.
#[derive(Clone)]
pub struct SpaceTimeMask {
    grid: Arc<Grid>,
    bits: Vec<bool>,
}

impl SpaceTimeMask {
    pub fn empty(grid: &Arc<Grid>) -> Self {
        SpaceTimeMask { grid: grid.clone(), bits: vec![false; grid.node_count()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, [f64; 3]) -> bool) -> Self {
        let mut m = Self::empty(grid);
        for it in 0..grid.nt {
            let t = grid.t(it);
            for s in 0..grid.slice_len() {
                let (ix, iy, iz) = grid.spatial_coords(s);
                if f(t, grid.node_pos(s)) {
                    m.set(it, ix, iy, iz, true);
                }
            }
        }
        m
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, it: usize, ix: usize, iy: usize, iz: usize) -> bool {
        self.bits[self.grid.idx(it, ix, iy, iz)]
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, iy: usize, iz: usize, v: bool) {
        let i = self.grid.idx(it, ix, iy, iz);
        self.bits[i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|b| *b)
    }

    /// All marked nodes as spacetime points.
    pub fn points(&self) -> Vec<Point> {
        let g = &self.grid;
        let sl = g.slice_len();
        let mut out = Vec::new();
        for (i, b) in self.bits.iter().enumerate() {
            if *b {
                let it = i / sl;
                out.push((g.t(it), g.node_pos(i % sl)));
            }
        }
        out
    }

    /// Marked nodes of one time slice, as spatial positions.
    pub fn slice_points(&self, it: usize) -> Vec<[f64; 3]> {
        let g = &self.grid;
        let base = it * g.slice_len();
        (0..g.slice_len())
            .filter(|s| self.bits[base + s])
            .map(|s| g.node_pos(s))
            .collect()
    }

    /// Does `other` mark every node this mask marks?
    pub fn subset_of(&self, other: &SpaceTimeMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Nodes marked here but not in `other`.
    pub fn minus_count(&self, other: &SpaceTimeMask) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && !**b).count()
    }

    fn mark_ball(&mut self, it: usize, center: [f64; 3], r: f64) {
        let g = self.grid.clone();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut wraps = [false; 3];
        for a in 0..3 {
            let dx = g.dx(a);
            let span = (r / dx).ceil() as i64 + 1;
            let i0 = ((center[a] - g.x0[a]) / dx).round() as i64;
            if g.periodic[a] && 2 * span + 1 >= g.n[a] as i64 {
                lo[a] = 0;
                hi[a] = g.n[a] - 1;
            } else if g.periodic[a] {
                wraps[a] = true;
                lo[a] = (i0 - span).rem_euclid(g.n[a] as i64) as usize;
                hi[a] = (i0 + span).rem_euclid(g.n[a] as i64) as usize;
            } else {
                lo[a] = (i0 - span).clamp(0, g.n[a] as i64 - 1) as usize;
                hi[a] = (i0 + span).clamp(0, g.n[a] as i64 - 1) as usize;
            }
        }
        let axis_range = |a: usize| -> Vec<usize> {
            if wraps[a] && lo[a] > hi[a] {
                (lo[a]..g.n[a]).chain(0..=hi[a]).collect()
            } else {
                (lo[a]..=hi[a]).collect()
            }
        };
        for iz in axis_range(2) {
            for iy in axis_range(1) {
                for ix in axis_range(0) {
                    let p = [g.x(0, ix), g.x(1, iy), g.x(2, iz)];
                    if g.distance(p, center) <= r {
                        self.set(it, ix, iy, iz, true);
                    }
                }
            }
        }
    }
}

/// Union of seed trajectory samples per time slice: the shared core of both
/// cylinder-set mask constructors.
fn trajectory_slices(flow: &FlowMap, seeds: &[Point], tau: f64) -> Vec<Vec<(usize, [f64; 3])>> {
    seeds
        .par_iter()
        .map(|&(t0, x0)| flow.trajectory_at_slices(t0, x0, tau))
        .collect()
}

/// Nodes of `Ĉ(τ, ρ; S)` for a seed set `S` given as a mask: every seed's
/// trajectory is swept over `|s| ≤ τ` and balls of radius `ρ` are marked at
/// each reachable time slice.
pub fn eulerian_cylinder_mask(flow: &FlowMap, tau: f64, rho: f64, seeds: &SpaceTimeMask) -> SpaceTimeMask {
    let mut out = SpaceTimeMask::empty(seeds.grid());
    for traj in trajectory_slices(flow, &seeds.points(), tau) {
        for (it, y) in traj {
            out.mark_ball(it, y, rho);
        }
    }
    out
}

/// Nodes within distance `inflate` of `Γ̂(τ, ρ; S)` for a seed set `S`.
///
/// Trajectories are launched from every grid node inside the `ρ`-ball of
/// each seed (plus the exact seed point), and each trajectory sample is
/// fattened by `inflate` so the discrete mask over-covers the continuum
/// set.  A natural `inflate` is one cell diagonal.
pub fn lagrangian_cylinder_mask(
    flow: &FlowMap,
    tau: f64,
    rho: f64,
    seeds: &SpaceTimeMask,
    inflate: f64,
) -> SpaceTimeMask {
    let g = seeds.grid().clone();
    // Launch points: the ρ-ball around each seed, discretized on the seed's
    // own time slice.
    let mut launches: Vec<Point> = Vec::new();
    let sl = g.slice_len();
    for (i, _) in seeds.bits.iter().enumerate().filter(|(_, b)| **b) {
        let it = i / sl;
        let t0 = g.t(it);
        let x0 = g.node_pos(i % sl);
        launches.push((t0, x0));
        let mut ball = SpaceTimeMask::empty(&g);
        ball.mark_ball(it, x0, rho);
        for p in ball.slice_points(it) {
            launches.push((t0, p));
        }
    }
    let mut out = SpaceTimeMask::empty(&g);
    for traj in trajectory_slices(flow, &launches, tau) {
        for (it, y) in traj {
            out.mark_ball(it, y, inflate);
        }
    }
    out
}

/// `q ∈ Γ̂(τ, ρ; Ω)` for a node-set `Ω`: does the trajectory through `q`
/// pass within `ρ` of a marked node of `Ω` while the time offset stays in
/// `[-τ, τ]`?  Evaluated directly from the definition, one trajectory per
/// query.
pub fn lagrangian_set_contains(
    flow: &FlowMap,
    tau: f64,
    rho: f64,
    omega: &SpaceTimeMask,
    q: Point,
) -> bool {
    let g = flow.grid();
    for (it, y) in flow.trajectory_at_slices(q.0, q.1, tau) {
        for p in omega.slice_points(it) {
            if g.distance(p, y) <= rho {
                return true;
            }
        }
    }
    false
}
