//! Per-node amplitude magnitudes.
//!
//! At a node with phase gradients `g_f` for the twelve faces, the
//! amplitude directions of a conjugate pair span the plane orthogonal to
//! `g_f`, and the pair contributes `2γ_p²(â⊗â + b̂⊗b̂)` to the quadratic
//! stress.  The six pair magnitudes must reproduce a prescribed symmetric
//! tensor `δ/3 + ε`.  The system is quadratic in `γ` (linear in `γ²`); it
//! is solved by a damped Newton iteration seeded from the isotropic
//! `ε = 0` solution, with the linear-in-`γ²` solve used to detect loss of
//! positivity (the "energy floor" failure).

use fields_core::{ScalarField, SymmetricTensorField};
use flow_geometry::SpaceTimeMask;
use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

use crate::{amplitude::WaveConfig, companion_face, phase::PhaseFunction, WaveError};

/// Isotropic pair magnitude at birth: with unit gradients in dodecahedral
/// directions the six pair tensors sum to `(32/5)γ² δ`, so `γ² = 5/96`
/// reproduces `δ/3`.
pub const ISOTROPIC_GAMMA_SQ: f64 = 5.0 / 96.0;

pub struct GammaSolution {
    /// One magnitude field per conjugate pair `p` (faces `2p`, `2p+1`).
    pub gamma: [ScalarField; 6],
    /// Largest reconstruction residual over the solved nodes.
    pub max_residual: f64,
    pub window: (usize, usize),
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Pair tensor `2(a⊗a + b⊗b)` in (xx,xy,xz,yy,yz,zz) order for the pair
/// whose phase gradient is `g` and whose companion gradient is `gs`.
fn pair_tensor(g: [f64; 3], gs: [f64; 3]) -> Option<[f64; 6]> {
    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    if g2 <= 0.0 {
        return None;
    }
    let dot = gs[0] * g[0] + gs[1] * g[1] + gs[2] * g[2];
    let b = [
        gs[0] - dot / g2 * g[0],
        gs[1] - dot / g2 * g[1],
        gs[2] - dot / g2 * g[2],
    ];
    let gn = g2.sqrt();
    let a = cross([-g[0] / gn, -g[1] / gn, -g[2] / gn], b);
    Some([
        2.0 * (a[0] * a[0] + b[0] * b[0]),
        2.0 * (a[0] * a[1] + b[0] * b[1]),
        2.0 * (a[0] * a[2] + b[0] * b[2]),
        2.0 * (a[1] * a[1] + b[1] * b[1]),
        2.0 * (a[1] * a[2] + b[1] * b[2]),
        2.0 * (a[2] * a[2] + b[2] * b[2]),
    ])
}

/// Outcome of a single-node solve, before grid bookkeeping.
enum NodeFailure {
    /// The linear-in-`γ²` solve produced a non-positive square.
    Floor(f64),
    /// Newton stalled above the residual tolerance.
    Stall(f64),
}

/// Solve the six-pair system at one node.  `grads[f]` is the phase
/// gradient of face `f`; `eps` is the prescribed deviation from isotropy
/// in (xx,xy,xz,yy,yz,zz) order.  Returns the six pair magnitudes and the
/// final residual.
pub fn solve_gamma_node(
    grads: &[[f64; 3]; 12],
    eps: [f64; 6],
    tol: f64,
) -> Result<([f64; 6], f64), WaveError> {
    match solve_node_inner(grads, eps, tol) {
        Ok(v) => Ok(v),
        Err(NodeFailure::Floor(v)) => Err(WaveError::EnergyFloor {
            it: 0,
            x: [0.0; 3],
            value: v,
        }),
        Err(NodeFailure::Stall(r)) => Err(WaveError::GammaConvergence {
            it: 0,
            x: [0.0; 3],
            residual: r,
        }),
    }
}

fn solve_node_inner(
    grads: &[[f64; 3]; 12],
    eps: [f64; 6],
    tol: f64,
) -> Result<([f64; 6], f64), NodeFailure> {
    let mut m = SMatrix::<f64, 6, 6>::zeros();
    for p in 0..6 {
        let g = grads[2 * p];
        let gs = grads[companion_face(2 * p)];
        let col = pair_tensor(g, gs).ok_or(NodeFailure::Floor(0.0))?;
        for r in 0..6 {
            m[(r, p)] = col[r];
        }
    }
    let mut rhs = SVector::<f64, 6>::from_column_slice(&eps);
    rhs[0] += 1.0 / 3.0;
    rhs[3] += 1.0 / 3.0;
    rhs[5] += 1.0 / 3.0;

    let lu = m.lu();
    // Positivity check: the system is linear in the squares, so the exact
    // squares are available up front.
    let u = lu.solve(&rhs).ok_or(NodeFailure::Floor(0.0))?;
    let min_u = u.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_u <= 0.0 {
        return Err(NodeFailure::Floor(min_u));
    }
    // Isotropic seed, then damped Newton on the quadratic form.
    let iso = lu
        .solve(&SVector::<f64, 6>::from_column_slice(&[
            1.0 / 3.0,
            0.0,
            0.0,
            1.0 / 3.0,
            0.0,
            1.0 / 3.0,
        ]))
        .ok_or(NodeFailure::Floor(0.0))?;
    let mut gamma = SVector::<f64, 6>::from_fn(|p, _| iso[p].max(1e-12).sqrt());
    let res = |ga: &SVector<f64, 6>| -> SVector<f64, 6> {
        let sq = SVector::<f64, 6>::from_fn(|p, _| ga[p] * ga[p]);
        m * sq - rhs
    };
    let mut f = res(&gamma);
    for _ in 0..40 {
        if f.amax() <= tol {
            break;
        }
        let jac = SMatrix::<f64, 6, 6>::from_fn(|r, p| 2.0 * gamma[p] * m[(r, p)]);
        let Some(step) = jac.lu().solve(&f) else {
            return Err(NodeFailure::Stall(f.amax()));
        };
        let mut lambda = 1.0;
        let base = f.norm();
        loop {
            let cand = gamma - lambda * step;
            let fc = res(&cand);
            if fc.norm() < base || lambda < 1e-4 {
                gamma = cand;
                f = fc;
                break;
            }
            lambda *= 0.5;
        }
    }
    let residual = f.amax();
    if residual > tol {
        return Err(NodeFailure::Stall(residual));
    }
    let mut out = [0.0; 6];
    for p in 0..6 {
        out[p] = gamma[p];
    }
    Ok((out, residual))
}

/// Solve the pair magnitudes over a slab.
///
/// `phases` are the twelve face phases of one location class; `eps` is the
/// prescribed deviation tensor; `mask`, when given, restricts the solve to
/// marked nodes (unsolved nodes keep the birth isotropic magnitude, which
/// is only ever multiplied by a vanishing envelope).
pub fn solve_gamma(
    eps: &SymmetricTensorField,
    phases: &[PhaseFunction],
    mask: Option<&SpaceTimeMask>,
    cfg: &WaveConfig,
) -> Result<GammaSolution, WaveError> {
    assert_eq!(phases.len(), 12, "one phase per face");
    let g = eps.grid().clone();
    let sl = g.slice_len();
    let lo = phases.iter().map(|p| p.window.0).max().unwrap();
    let hi = phases.iter().map(|p| p.window.1).min().unwrap();
    if lo > hi {
        return Err(WaveError::EmptyWindow { birth: phases[0].birth.0 });
    }
    let mut gamma: [ScalarField; 6] =
        std::array::from_fn(|_| ScalarField::from_fn(&g, |_, _| ISOTROPIC_GAMMA_SQ.sqrt()));
    let mut max_residual: f64 = 0.0;
    for it in lo..=hi {
        let solved: Vec<Option<Result<([f64; 6], f64), NodeFailure>>> = (0..sl)
            .into_par_iter()
            .map(|s| {
                let (ix, iy, iz) = g.spatial_coords(s);
                if let Some(m) = mask {
                    if !m.get(it, ix, iy, iz) {
                        return None;
                    }
                }
                let grads: [[f64; 3]; 12] =
                    std::array::from_fn(|f| phases[f].grad.at(it, ix, iy, iz));
                let e6 = eps.at6(it, ix, iy, iz);
                Some(solve_node_inner(&grads, e6, cfg.gamma_tol))
            })
            .collect();
        for (s, r) in solved.into_iter().enumerate() {
            let (ix, iy, iz) = g.spatial_coords(s);
            match r {
                None => {}
                Some(Ok((ga, res))) => {
                    for p in 0..6 {
                        gamma[p].set(it, ix, iy, iz, ga[p]);
                    }
                    max_residual = max_residual.max(res);
                }
                Some(Err(NodeFailure::Floor(v))) => {
                    return Err(WaveError::EnergyFloor {
                        it,
                        x: g.node_pos(s),
                        value: v,
                    })
                }
                Some(Err(NodeFailure::Stall(res))) => {
                    return Err(WaveError::GammaConvergence {
                        it,
                        x: g.node_pos(s),
                        residual: res,
                    })
                }
            }
        }
    }
    Ok(GammaSolution {
        gamma,
        max_residual,
        window: (lo, hi),
    })
}
