//! Quadratic partitions of unity in time and in transported space.
//!
//! One fixed profile `η` with `Σ_{y∈ℤ} η²(u − y) = 1` and
//! `supp η ⊂ (−2/3, 2/3)` serves both roles.  Time cutoffs are rescalings
//! `η((t − k₀τ)/τ)`.  Space cutoffs are born on slice `k₀τ` as tensor
//! bumps `ψ̄_k(x) = Π_a η((x_a − k_aρ)/ρ)` and extended off the birth
//! slice by the backward flow pullback, which preserves the squared
//! partition identity exactly node by node.

use fields_core::ScalarField;
use flow_geometry::FlowMap;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::{backmap::BackwardMap, WaveError};

/// Smooth step with `s(w) + s(1 − w) = 1`, `s ≡ 0` for `w ≤ 0`.
fn step(w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return 1.0;
    }
    let e = (-1.0 / w).exp();
    let f = (-1.0 / (1.0 - w)).exp();
    e / (e + f)
}

/// The quadratic-partition profile: `η²(u) = 1` on `|u| ≤ 1/3`, decaying
/// to zero at `|u| = 2/3`, with `Σ_{y∈ℤ} η²(u − y) = 1` for every `u`.
pub fn eta_profile(u: f64) -> f64 {
    let a = u.abs();
    if a >= 2.0 / 3.0 {
        return 0.0;
    }
    if a <= 1.0 / 3.0 {
        return 1.0;
    }
    step(2.0 - 3.0 * a).sqrt()
}

/// Time and space cutoffs over one grid slab.
pub struct CutoffSystem {
    pub tau: f64,
    pub rho: f64,
    maps: BTreeMap<i64, Arc<BackwardMap>>,
}

impl CutoffSystem {
    /// Time cutoff of birth index `k0` at time `t`.
    pub fn eta_time(&self, k0: i64, t: f64) -> f64 {
        eta_profile((t - k0 as f64 * self.tau) / self.tau)
    }

    /// Birth indices whose windows meet the grid time range.
    pub fn birth_indices(&self) -> Vec<i64> {
        self.maps.keys().copied().collect()
    }

    pub fn back_map(&self, k0: i64) -> Option<&Arc<BackwardMap>> {
        self.maps.get(&k0)
    }

    /// Space cutoff `ψ_k` at a node; zero off the window of `k₀` and on
    /// escaped trajectories.
    pub fn psi(&self, k: &[i64; 4], it: usize, ix: usize, iy: usize, iz: usize) -> f64 {
        let Some(map) = self.maps.get(&k[0]) else {
            return 0.0;
        };
        if !map.in_window(it) || map.is_dead(it, ix, iy, iz) {
            return 0.0;
        }
        let y = map.position(it, ix, iy, iz);
        let mut p = 1.0;
        for a in 0..3 {
            p *= eta_profile(y[a] / self.rho - k[a + 1] as f64);
        }
        p
    }

    /// Materialized `ψ_k` over the whole slab.
    pub fn psi_field(&self, k: &[i64; 4]) -> ScalarField {
        let rho = self.rho;
        let kk = *k;
        match self.maps.get(&k[0]) {
            Some(map) => map.pullback(move |y| {
                let mut p = 1.0;
                for a in 0..3 {
                    p *= eta_profile(y[a] / rho - kk[a + 1] as f64);
                }
                p
            }),
            None => ScalarField::zeros(self.maps.values().next().expect("nonempty").grid()),
        }
    }

    /// Spatial cells whose cutoff is nonzero at a node (at most eight).
    pub fn active_cells(&self, k0: i64, it: usize, ix: usize, iy: usize, iz: usize) -> Vec<[i64; 3]> {
        let Some(map) = self.maps.get(&k0) else {
            return Vec::new();
        };
        if !map.in_window(it) || map.is_dead(it, ix, iy, iz) {
            return Vec::new();
        }
        let y = map.position(it, ix, iy, iz);
        let mut per_axis: [Vec<i64>; 3] = Default::default();
        for a in 0..3 {
            let u = y[a] / self.rho;
            let lo = (u - 2.0 / 3.0).ceil() as i64;
            let hi = (u + 2.0 / 3.0).floor() as i64;
            for c in lo..=hi {
                if eta_profile(u - c as f64) > 0.0 {
                    per_axis[a].push(c);
                }
            }
        }
        let mut out = Vec::new();
        for &c1 in &per_axis[0] {
            for &c2 in &per_axis[1] {
                for &c3 in &per_axis[2] {
                    out.push([c1, c2, c3]);
                }
            }
        }
        out
    }

    /// `Σ_k ψ_k²` at a node, enumerating the active cells.
    pub fn sum_psi_sq(&self, k0: i64, it: usize, ix: usize, iy: usize, iz: usize) -> f64 {
        self.active_cells(k0, it, ix, iy, iz)
            .iter()
            .map(|c| {
                self.psi(&[k0, c[0], c[1], c[2]], it, ix, iy, iz)
                    .powi(2)
            })
            .sum()
    }
}

/// Build the cutoff system for lattice spacings `(τ, ρ)` over the grid of
/// `flow`.  Requires at least four cells per spacing so the profile's
/// transition region is resolved.
pub fn build_cutoffs(flow: &FlowMap, tau: f64, rho: f64) -> Result<CutoffSystem, WaveError> {
    let g = flow.grid();
    let max_dx = (0..3).map(|a| g.dx(a)).fold(0.0, f64::max);
    if rho < 4.0 * max_dx {
        return Err(WaveError::UnderResolved {
            what: "space cutoff scale rho",
            value: rho,
            min: 4.0 * max_dx,
        });
    }
    if tau < 4.0 * g.dt() {
        return Err(WaveError::UnderResolved {
            what: "time cutoff scale tau",
            value: tau,
            min: 4.0 * g.dt(),
        });
    }
    let lifespan = 2.0 * tau / 3.0;
    let k_lo = ((g.t0 - lifespan) / tau).ceil() as i64;
    let k_hi = ((g.t1 + lifespan) / tau).floor() as i64;
    let mut maps = BTreeMap::new();
    for k0 in k_lo..=k_hi {
        let birth = k0 as f64 * tau;
        if let Ok(map) = BackwardMap::new(flow, birth, lifespan) {
            maps.insert(k0, Arc::new(map));
        }
    }
    if maps.is_empty() {
        return Err(WaveError::EmptyWindow { birth: g.t0 });
    }
    Ok(CutoffSystem { tau, rho, maps })
}
