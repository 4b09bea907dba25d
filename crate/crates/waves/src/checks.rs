//! Oscillation diagnostics: gradient floors for stationary-phase
//! estimates, and the pointwise overlap count of wave supports.

use fields_core::ComplexVectorField;
use flow_geometry::SpaceTimeMask;
use rayon::prelude::*;

use crate::phase::PhaseFunction;

/// Nodes where a wave is effectively nonzero (above `threshold`).
pub fn support_mask(v: &ComplexVectorField, threshold: f64) -> SpaceTimeMask {
    let g = v.grid().clone();
    let mut m = SpaceTimeMask::empty(&g);
    for it in 0..g.nt {
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            let re = v.re.at(it, ix, iy, iz);
            let im = v.im.at(it, ix, iy, iz);
            let mag = (re[0] * re[0] + re[1] * re[1] + re[2] * re[2] + im[0] * im[0]
                + im[1] * im[1]
                + im[2] * im[2])
                .sqrt();
            if mag > threshold {
                m.set(it, ix, iy, iz, true);
            }
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct NonstationaryPhaseReport {
    /// Smallest single-phase gradient magnitude over its wave's support.
    pub min_single: f64,
    /// Smallest `|∇(ξ_I + ξ_J)|` over overlapping non-conjugate supports.
    pub min_pair: f64,
    /// Required floor `1/A`.
    pub floor: f64,
    pub pass: bool,
}

/// Gradient floors over live waves.  Each entry is a phase with the
/// support mask of its wave; conjugate pairs (same birth, opposite
/// direction) are excluded from the pair minimum since their phase sum
/// vanishes by design.
pub fn check_nonstationary_phase(
    entries: &[(&PhaseFunction, &SpaceTimeMask)],
    a_floor: f64,
) -> NonstationaryPhaseReport {
    let mut min_single = f64::INFINITY;
    let mut min_pair = f64::INFINITY;
    for (phase, mask) in entries {
        let g = mask.grid();
        for it in phase.window.0..=phase.window.1 {
            for s in 0..g.slice_len() {
                let (ix, iy, iz) = g.spatial_coords(s);
                if !mask.get(it, ix, iy, iz) {
                    continue;
                }
                let gr = phase.grad.at(it, ix, iy, iz);
                min_single =
                    min_single.min((gr[0] * gr[0] + gr[1] * gr[1] + gr[2] * gr[2]).sqrt());
            }
        }
    }
    for (i, (pi, mi)) in entries.iter().enumerate() {
        for (pj, mj) in entries.iter().skip(i + 1) {
            let conjugate = (pi.birth.0 - pj.birth.0).abs() < 1e-12
                && (pi.dir[0] + pj.dir[0]).abs() < 1e-9
                && (pi.dir[1] + pj.dir[1]).abs() < 1e-9
                && (pi.dir[2] + pj.dir[2]).abs() < 1e-9
                && pi.birth.1 == pj.birth.1;
            if conjugate {
                continue;
            }
            let g = mi.grid();
            let lo = pi.window.0.max(pj.window.0);
            let hi = pi.window.1.min(pj.window.1);
            for it in lo..=hi {
                for s in 0..g.slice_len() {
                    let (ix, iy, iz) = g.spatial_coords(s);
                    if !mi.get(it, ix, iy, iz) || !mj.get(it, ix, iy, iz) {
                        continue;
                    }
                    let a = pi.grad.at(it, ix, iy, iz);
                    let b = pj.grad.at(it, ix, iy, iz);
                    let sum = ((a[0] + b[0]).powi(2)
                        + (a[1] + b[1]).powi(2)
                        + (a[2] + b[2]).powi(2))
                    .sqrt();
                    min_pair = min_pair.min(sum);
                }
            }
        }
    }
    let floor = 1.0 / a_floor;
    NonstationaryPhaseReport {
        min_single,
        min_pair,
        floor,
        pass: min_single >= floor && min_pair >= floor,
    }
}

#[derive(Debug, Clone)]
pub struct InteractionReport {
    /// Largest number of supports covering a single spacetime node.
    pub max_overlap: usize,
    pub bound: usize,
    pub pass: bool,
}

/// Pointwise interaction count: how many wave supports share a node, at
/// worst.  The geometry of the cutoff lattice caps this at two birth
/// indices per axis times the face count.
pub fn check_limited_interactions(supports: &[SpaceTimeMask], bound: usize) -> InteractionReport {
    if supports.is_empty() {
        return InteractionReport {
            max_overlap: 0,
            bound,
            pass: true,
        };
    }
    let g = supports[0].grid().clone();
    let sl = g.slice_len();
    let max_overlap = (0..g.nt)
        .flat_map(|it| (0..sl).map(move |s| (it, s)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(it, s)| {
            let (ix, iy, iz) = g.spatial_coords(s);
            supports
                .iter()
                .filter(|m| m.get(it, ix, iy, iz))
                .count()
        })
        .max()
        .unwrap_or(0);
    InteractionReport {
        max_overlap,
        bound,
        pass: max_overlap <= bound,
    }
}
