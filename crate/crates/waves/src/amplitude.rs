//! Complex wave amplitudes.
//!
//! The imaginary part of the amplitude is an enveloped projection of the
//! companion phase gradient onto the plane orthogonal to the wave's own
//! phase gradient; the real part is fixed by the curl-eigenfunction
//! relation `a = −(∇ξ/|∇ξ|)×b`.  Together `v = a + ib` satisfies
//! `(i∇ξ)×v = |∇ξ|v` pointwise, so the oscillatory wave behaves to
//! leading order like a curl eigenfunction and is divergence free to
//! leading order.  The potential `λ⁻²e^{iλξ}v/|∇ξ|²` and the exact
//! lower-order corrector `δv` are materialized here.

use fields_core::{
    deriv::curl, ComplexVectorField, ScalarField, VectorField,
};
use rayon::prelude::*;

use crate::{
    conjugate_face, cutoffs::CutoffSystem, phase::PhaseFunction, WaveError,
};

/// Index of one wave: four lattice coordinates (time, space) and a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WaveIndex {
    pub k: [i64; 4],
    pub face: usize,
}

impl WaveIndex {
    /// The oppositely-oscillating partner carrying the conjugate amplitude.
    pub fn conjugate(&self) -> WaveIndex {
        WaveIndex {
            k: self.k,
            face: conjugate_face(self.face),
        }
    }

    /// The same-cell wave whose gradient supplies this wave's direction.
    pub fn companion(&self) -> WaveIndex {
        WaveIndex {
            k: self.k,
            face: crate::companion_face(self.face),
        }
    }

    /// Birth point `(k₀τ, (k₁ρ, k₂ρ, k₃ρ))`.
    pub fn birth(&self, tau: f64, rho: f64) -> (f64, [f64; 3]) {
        (
            self.k[0] as f64 * tau,
            [
                self.k[1] as f64 * rho,
                self.k[2] as f64 * rho,
                self.k[3] as f64 * rho,
            ],
        )
    }
}

/// Tunable constants of the construction.
#[derive(Debug, Clone)]
pub struct WaveConfig {
    /// Ceiling on phase-gradient drift before a phase is rejected.
    pub c0: f64,
    /// Phase-gradient floor `1/a_floor` below which oscillatory estimates fail.
    pub a_floor: f64,
    /// Ratio floor between the energy envelope and the stress it absorbs.
    pub k_energy: f64,
    /// Residual tolerance of the per-node magnitude solve.
    pub gamma_tol: f64,
    /// Solvability radius for the prescribed deviation tensor.
    pub eps_radius: f64,
    /// Minimum acceptable direction separation when loading the frame.
    pub sep_floor: f64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig {
            c0: 0.1,
            a_floor: 4.0,
            k_energy: 100.0,
            gamma_tol: 1e-8,
            eps_radius: 0.25,
            sep_floor: 0.05,
        }
    }
}

pub struct WaveAmplitude {
    pub index: WaveIndex,
    pub lambda: f64,
    /// Real part of the amplitude.
    pub a: VectorField,
    /// Imaginary part of the amplitude.
    pub b: VectorField,
    /// Phase values with the birth-point offset applied.
    pub xi: ScalarField,
    /// `v/|∇ξ|²`.
    pub y: ComplexVectorField,
    /// Potential `λ⁻² e^{iλξ} y`; the wave is its double curl.
    pub pot: ComplexVectorField,
    /// Exact lower-order corrector `λ⁻¹∇×[(i∇ξ)×y + λ⁻¹∇×y]`.
    pub dv: ComplexVectorField,
    pub window: (usize, usize),
    /// Smallest `|∇ξ|` met on the amplitude's support.
    pub min_grad: f64,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Build the amplitude of wave `idx`.
///
/// `phase`/`companion` may be shared across cells of one rotation class
/// (born at the lattice origin); the birth-point phase offset is applied
/// here.  `gamma` is the pair-magnitude field of `idx`'s conjugate pair.
pub fn build_amplitude(
    idx: WaveIndex,
    phase: &PhaseFunction,
    companion: &PhaseFunction,
    cutoffs: &CutoffSystem,
    e_sqrt: &ScalarField,
    gamma: &ScalarField,
    lambda: f64,
    cfg: &WaveConfig,
) -> Result<WaveAmplitude, WaveError> {
    let g = phase.xi.grid().clone();
    if !std::sync::Arc::ptr_eq(&g, e_sqrt.grid()) {
        return Err(WaveError::GridMismatch);
    }
    let lo = phase.window.0.max(companion.window.0);
    let hi = phase.window.1.min(companion.window.1);
    if lo > hi {
        return Err(WaveError::EmptyWindow { birth: phase.birth.0 });
    }
    let (_, x_birth) = idx.birth(cutoffs.tau, cutoffs.rho);
    let d = phase.dir;
    let offset = d[0] * (phase.birth.1[0] - x_birth[0])
        + d[1] * (phase.birth.1[1] - x_birth[1])
        + d[2] * (phase.birth.1[2] - x_birth[2]);

    let sl = g.slice_len();
    let mut a = VectorField::zeros(&g);
    let mut b = VectorField::zeros(&g);
    let mut xi = ScalarField::zeros(&g);
    let mut y = ComplexVectorField::zeros(&g);
    let mut min_grad = f64::INFINITY;
    for it in lo..=hi {
        let t = g.t(it);
        let eta = cutoffs.eta_time(idx.k[0], t);
        let rows: Vec<([f64; 3], [f64; 3], f64, [f64; 3], [f64; 3], f64)> = (0..sl)
            .into_par_iter()
            .map(|s| {
                let (ix, iy, iz) = g.spatial_coords(s);
                let xv = phase.xi.at(it, ix, iy, iz) + offset;
                if eta == 0.0 {
                    return ([0.0; 3], [0.0; 3], xv, [0.0; 3], [0.0; 3], f64::INFINITY);
                }
                let psi = cutoffs.psi(&idx.k, it, ix, iy, iz);
                let env = e_sqrt.at(it, ix, iy, iz) * eta * psi * gamma.at(it, ix, iy, iz);
                if env == 0.0 {
                    return ([0.0; 3], [0.0; 3], xv, [0.0; 3], [0.0; 3], f64::INFINITY);
                }
                let gr = phase.grad.at(it, ix, iy, iz);
                let gs = companion.grad.at(it, ix, iy, iz);
                let g2 = gr[0] * gr[0] + gr[1] * gr[1] + gr[2] * gr[2];
                let gn = g2.sqrt();
                let dot = gs[0] * gr[0] + gs[1] * gr[1] + gs[2] * gr[2];
                let bv = [
                    env * (gs[0] - dot / g2 * gr[0]),
                    env * (gs[1] - dot / g2 * gr[1]),
                    env * (gs[2] - dot / g2 * gr[2]),
                ];
                let av = cross([-gr[0] / gn, -gr[1] / gn, -gr[2] / gn], bv);
                let yre = [av[0] / g2, av[1] / g2, av[2] / g2];
                let yim = [bv[0] / g2, bv[1] / g2, bv[2] / g2];
                (av, bv, xv, yre, yim, gn)
            })
            .collect();
        for (s, (av, bv, xv, yre, yim, gn)) in rows.into_iter().enumerate() {
            let (ix, iy, iz) = g.spatial_coords(s);
            a.set(it, ix, iy, iz, av);
            b.set(it, ix, iy, iz, bv);
            xi.set(it, ix, iy, iz, xv);
            y.re.set(it, ix, iy, iz, yre);
            y.im.set(it, ix, iy, iz, yim);
            min_grad = min_grad.min(gn);
        }
    }
    if min_grad < 1.0 / cfg.a_floor {
        return Err(WaveError::PhaseFloor {
            value: min_grad,
            floor: cfg.a_floor,
        });
    }

    // Potential λ⁻² e^{iλξ} y.
    let mut pot = ComplexVectorField::zeros(&g);
    for it in lo..=hi {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let yre = y.re.at(it, ix, iy, iz);
            let yim = y.im.at(it, ix, iy, iz);
            if yre == [0.0; 3] && yim == [0.0; 3] {
                continue;
            }
            let ph = lambda * xi.at(it, ix, iy, iz);
            let (sn, cs) = ph.sin_cos();
            let l2 = lambda * lambda;
            let mut pre = [0.0; 3];
            let mut pim = [0.0; 3];
            for c in 0..3 {
                pre[c] = (cs * yre[c] - sn * yim[c]) / l2;
                pim[c] = (sn * yre[c] + cs * yim[c]) / l2;
            }
            pot.re.set(it, ix, iy, iz, pre);
            pot.im.set(it, ix, iy, iz, pim);
        }
    }

    // Corrector δv = λ⁻¹ ∇×[(i∇ξ)×y + λ⁻¹ ∇×y].
    let cy_re = curl(&y.re);
    let cy_im = curl(&y.im);
    let mut z_re = VectorField::zeros(&g);
    let mut z_im = VectorField::zeros(&g);
    for it in lo..=hi {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let gr = phase.grad.at(it, ix, iy, iz);
            let yre = y.re.at(it, ix, iy, iz);
            let yim = y.im.at(it, ix, iy, iz);
            let gyre = cross(gr, yre);
            let gyim = cross(gr, yim);
            let cre = cy_re.at(it, ix, iy, iz);
            let cim = cy_im.at(it, ix, iy, iz);
            let mut zr = [0.0; 3];
            let mut zi = [0.0; 3];
            for c in 0..3 {
                zr[c] = -gyim[c] + cre[c] / lambda;
                zi[c] = gyre[c] + cim[c] / lambda;
            }
            z_re.set(it, ix, iy, iz, zr);
            z_im.set(it, ix, iy, iz, zi);
        }
    }
    let mut dv_re = curl(&z_re);
    let mut dv_im = curl(&z_im);
    dv_re.scale(1.0 / lambda);
    dv_im.scale(1.0 / lambda);

    Ok(WaveAmplitude {
        index: idx,
        lambda,
        a,
        b,
        xi,
        y,
        pot,
        dv: ComplexVectorField {
            re: dv_re,
            im: dv_im,
        },
        window: (lo, hi),
        min_grad,
    })
}
