//! Flow maps of the material derivative `∂_t + v·∇`.
//!
//! `FlowMap` integrates trajectories of a gridded velocity field with a
//! fixed-step RK4 scheme, sampling the velocity trilinearly in space and
//! linearly in time.  All downstream cylinder predicates are built on
//! [`FlowMap::flow`].

use fields_core::{Grid, VectorField};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    /// The trajectory left the box through a non-periodic face.
    #[error("trajectory escaped the box on a non-periodic axis at t = {exit_time}")]
    Escape { exit_time: f64 },
}

/// One-parameter group of maps `Φ_s(t,x) = (t+s, Φ'_s(t,x))` generated by
/// `∂_t + v·∇`.
pub struct FlowMap {
    velocity: VectorField,
    step: f64,
}

impl FlowMap {
    /// Fixed integrator step; callers normally use [`FlowMap::with_advection_time`].
    pub fn new(velocity: VectorField, step: f64) -> Self {
        assert!(step > 0.0 && step.is_finite(), "integrator step must be positive");
        FlowMap { velocity, step }
    }

    /// Standard step choice `min(θ/64, grid dt)` for a natural advection
    /// time `θ` (typically `Ξ⁻¹ e_v^{-1/2}` of the backing state).
    pub fn with_advection_time(velocity: VectorField, theta: f64) -> Self {
        let dt = velocity.grid().dt();
        let step = (theta / 64.0).min(dt);
        Self::new(velocity, step)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.velocity.grid()
    }

    pub fn velocity(&self) -> &VectorField {
        &self.velocity
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn sample(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        self.velocity.sample(t, x)
    }

    /// Is `x` inside the box on every non-periodic axis (with a half-cell
    /// slack so grazing the boundary is not an escape)?
    fn inside(&self, x: [f64; 3]) -> bool {
        let g = self.grid();
        for a in 0..3 {
            if g.periodic[a] {
                continue;
            }
            let slack = 0.5 * g.dx(a);
            if x[a] < g.x0[a] - slack || x[a] > g.x1[a] + slack {
                return false;
            }
        }
        true
    }

    /// `Φ_s(t,x)`.  Returns `(t+s, Φ'_s(t,x))`, integrating with signed
    /// fixed-step RK4.  Fails if the trajectory leaves the box through a
    /// non-periodic face before time `t+s`.
    pub fn flow(&self, t: f64, x: [f64; 3], s: f64) -> Result<(f64, [f64; 3]), FlowError> {
        if s == 0.0 {
            return Ok((t, x));
        }
        let n = (s.abs() / self.step).ceil().max(1.0) as usize;
        let h = s / n as f64;
        let mut pos = x;
        let mut tc = t;
        for _ in 0..n {
            pos = self.rk4_step(tc, pos, h);
            tc += h;
            if !self.inside(pos) {
                return Err(FlowError::Escape { exit_time: tc });
            }
        }
        Ok((t + s, pos))
    }

    /// Spatial part `Φ'_s(t,x)`.
    pub fn flow_spatial(&self, t: f64, x: [f64; 3], s: f64) -> Result<[f64; 3], FlowError> {
        Ok(self.flow(t, x, s)?.1)
    }

    fn rk4_step(&self, t: f64, x: [f64; 3], h: f64) -> [f64; 3] {
        let k1 = self.sample(t, x);
        let k2 = self.sample(t + 0.5 * h, add(x, scale(k1, 0.5 * h)));
        let k3 = self.sample(t + 0.5 * h, add(x, scale(k2, 0.5 * h)));
        let k4 = self.sample(t + h, add(x, scale(k3, h)));
        let mut out = x;
        for a in 0..3 {
            out[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        out
    }

    /// Trajectory through `(t0, x0)` sampled at every grid time slice whose
    /// offset from `t0` lies in `[-tau, tau]`.  Slices the trajectory cannot
    /// reach (escape) are omitted.
    pub fn trajectory_at_slices(&self, t0: f64, x0: [f64; 3], tau: f64) -> Vec<(usize, [f64; 3])> {
        let g = self.grid();
        let mut out = Vec::new();
        // Walk outward from the slice nearest t0 so each arc is integrated once.
        let mut fwd: Option<[f64; 3]> = Some(x0);
        let mut fwd_t = t0;
        for it in 0..g.nt {
            let t = g.t(it);
            if t < t0 - tau || t > t0 + tau || t < t0 {
                continue;
            }
            if let Some(p) = fwd {
                match self.flow(fwd_t, p, t - fwd_t) {
                    Ok((_, q)) => {
                        out.push((it, q));
                        fwd = Some(q);
                        fwd_t = t;
                    }
                    Err(_) => fwd = None,
                }
            }
        }
        let mut bwd: Option<[f64; 3]> = Some(x0);
        let mut bwd_t = t0;
        for it in (0..g.nt).rev() {
            let t = g.t(it);
            if t < t0 - tau || t > t0 + tau || t >= t0 {
                continue;
            }
            if let Some(p) = bwd {
                match self.flow(bwd_t, p, t - bwd_t) {
                    Ok((_, q)) => {
                        out.push((it, q));
                        bwd = Some(q);
                        bwd_t = t;
                    }
                    Err(_) => bwd = None,
                }
            }
        }
        out
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], c: f64) -> [f64; 3] {
    [a[0] * c, a[1] * c, a[2] * c]
}

/// Sup over interior nodes of the Frobenius norm of `∇v`.  The two-cell
/// boundary margin on non-periodic axes avoids the stencil's zero-extension
/// rows, which are meaningless for velocities that do not vanish at the
/// boundary.
pub fn sup_gradient_norm(v: &VectorField) -> f64 {
    let g = v.grid().clone();
    let mut sup: f64 = 0.0;
    let grads: Vec<_> = (0..3).map(|c| fields_core::gradient(&v.component(c))).collect();
    let margin = |a: usize| if g.periodic[a] { 0 } else { 2 };
    for it in 0..g.nt {
        for iz in margin(2)..g.n[2] - margin(2) {
            for iy in margin(1)..g.n[1] - margin(1) {
                for ix in margin(0)..g.n[0] - margin(0) {
                    let mut frob = 0.0;
                    for gc in &grads {
                        let d = gc.at(it, ix, iy, iz);
                        frob += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    }
                    sup = sup.max(frob.sqrt());
                }
            }
        }
    }
    sup
}
