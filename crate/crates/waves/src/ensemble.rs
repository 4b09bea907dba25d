//! The full correction: every live wave over a stress support.
//!
//! Live indices are the lattice cells whose cutoffs meet the support of
//! the energy envelope.  Phases and pair magnitudes depend on the cell
//! only through its birth slice and parity class, so they are built once
//! per `(birth, class)` group and shared across cells.  Waves are then
//! assembled one at a time into the running correction and the running
//! quadratic stress, so per-wave fields never accumulate in memory.

use std::collections::BTreeSet;

use fields_core::{ScalarField, SymmetricTensorField, VectorField};
use flow_geometry::{FlowMap, SpaceTimeMask};

use crate::{
    amplitude::{build_amplitude, WaveConfig, WaveIndex},
    assemble::assemble_wave,
    checks::{check_limited_interactions, support_mask, InteractionReport},
    companion_face,
    cutoffs::{build_cutoffs, CutoffSystem},
    frame::DodecahedralFrame,
    gamma::solve_gamma,
    phase::PhaseFunction,
    WaveError,
};

pub struct EnsembleInput<'a> {
    pub flow: &'a FlowMap,
    /// Energy envelope `ẽ^{1/2}` (nonnegative, covering the stress support).
    pub e_sqrt: &'a ScalarField,
    /// Stress tensor the correction must cancel at low frequency.
    pub stress: &'a SymmetricTensorField,
    pub frame: &'a DodecahedralFrame,
    pub tau: f64,
    pub rho: f64,
    pub lambda: f64,
    pub config: WaveConfig,
}

pub struct WaveEnsemble {
    /// Real part of the summed waves — the velocity correction.
    pub correction: VectorField,
    /// Sup norm of the imaginary residue of the sum (conjugate pairing).
    pub imag_residual: f64,
    /// Sup over the envelope support of
    /// `|Σ v_I v̄_I − (ẽ δ/3 − (stress − tr/3 δ))|`.
    pub stress_residual: f64,
    /// Same residual phrased through the pressure shift
    /// `P₀ = −ẽ/3 + tr(stress)/3`: `|Σ v_I v̄_I + P₀δ + stress|`.
    pub stress_residual_p0: f64,
    /// Sup of the energy envelope `ẽ`, the natural residual scale.
    pub stress_scale: f64,
    pub supports: Vec<(WaveIndex, SpaceTimeMask)>,
    pub wave_count: usize,
    /// Guaranteed floor on `|∇ξ_I|` over supports (1 − measured drift).
    pub min_single_grad: f64,
    /// Guaranteed floor on `|∇(ξ_I + ξ_J)|` over overlapping non-conjugate
    /// pairs: direction separation minus both measured drifts.
    pub min_pair_grad: f64,
    pub interactions: InteractionReport,
    pub max_gamma_residual: f64,
    pub max_div_ratio: f64,
    pub max_drift: f64,
    pub cutoffs: CutoffSystem,
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn build_ensemble(input: &EnsembleInput) -> Result<WaveEnsemble, WaveError> {
    let g = input.flow.grid().clone();
    if !std::sync::Arc::ptr_eq(&g, input.e_sqrt.grid())
        || !std::sync::Arc::ptr_eq(&g, input.stress.grid())
    {
        return Err(WaveError::GridMismatch);
    }
    let cfg = &input.config;
    let cutoffs = build_cutoffs(input.flow, input.tau, input.rho)?;
    let sl = g.slice_len();

    // Prescribed deviation from isotropy: ε = −(stress − tr/3 δ)/ẽ where
    // the envelope is positive.
    let mut eps = SymmetricTensorField::zeros(&g);
    let mut env_mask = SpaceTimeMask::empty(&g);
    let mut eps_sup: f64 = 0.0;
    let mut e_sup: f64 = 0.0;
    for it in 0..g.nt {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let es = input.e_sqrt.at(it, ix, iy, iz);
            if es <= 0.0 {
                continue;
            }
            env_mask.set(it, ix, iy, iz, true);
            let e = es * es;
            e_sup = e_sup.max(e);
            let r = input.stress.at6(it, ix, iy, iz);
            let tr3 = (r[0] + r[3] + r[5]) / 3.0;
            let mut v = [0.0; 6];
            for (c, rv) in r.iter().enumerate() {
                let dev = rv - if c == 0 || c == 3 || c == 5 { tr3 } else { 0.0 };
                v[c] = -dev / e;
                eps_sup = eps_sup.max(v[c].abs());
            }
            eps.set6(it, ix, iy, iz, v);
        }
    }
    if eps_sup > cfg.eps_radius {
        return Err(WaveError::EpsTooLarge {
            value: eps_sup,
            radius: cfg.eps_radius,
        });
    }

    let mut correction_re = VectorField::zeros(&g);
    let mut correction_im = VectorField::zeros(&g);
    let mut quad_stress = SymmetricTensorField::zeros(&g);
    let mut supports: Vec<(WaveIndex, SpaceTimeMask)> = Vec::new();
    let mut wave_meta: Vec<([f64; 3], f64)> = Vec::new(); // (direction, drift)
    let mut max_gamma_residual: f64 = 0.0;
    let mut max_div_ratio: f64 = 0.0;
    let mut max_drift: f64 = 0.0;

    for k0 in cutoffs.birth_indices() {
        let back = cutoffs.back_map(k0).expect("listed birth index").clone();
        let (lo, hi) = back.window();
        // Cells whose cutoff meets the envelope support, per parity class.
        let mut cells: BTreeSet<[i64; 3]> = BTreeSet::new();
        for it in lo..=hi {
            for s in 0..sl {
                let (ix, iy, iz) = g.spatial_coords(s);
                if !env_mask.get(it, ix, iy, iz) {
                    continue;
                }
                for c in cutoffs.active_cells(k0, it, ix, iy, iz) {
                    cells.insert(c);
                }
            }
        }
        if cells.is_empty() {
            continue;
        }
        let classes: BTreeSet<usize> = cells
            .iter()
            .map(|c| DodecahedralFrame::rotation_class(&[k0, c[0], c[1], c[2]]))
            .collect();
        for class in classes {
            // Shared phases for this (birth, class) group, born at the
            // lattice origin; the per-cell offset is applied downstream.
            let phases: Vec<PhaseFunction> = (0..12)
                .map(|f| {
                    let dir = input.frame.direction_class(class, f);
                    PhaseFunction::from_back_map(&back, dir, [0.0; 3], cfg.c0)
                })
                .collect::<Result<_, _>>()?;
            let gamma = solve_gamma(&eps, &phases, Some(&env_mask), cfg)?;
            max_gamma_residual = max_gamma_residual.max(gamma.max_residual);
            for cell in cells.iter().filter(|c| {
                DodecahedralFrame::rotation_class(&[k0, c[0], c[1], c[2]]) == class
            }) {
                for face in 0..12 {
                    let idx = WaveIndex {
                        k: [k0, cell[0], cell[1], cell[2]],
                        face,
                    };
                    let amp = build_amplitude(
                        idx,
                        &phases[face],
                        &phases[companion_face(face)],
                        &cutoffs,
                        input.e_sqrt,
                        &gamma.gamma[face / 2],
                        input.lambda,
                        cfg,
                    )?;
                    let wave = assemble_wave(&amp)?;
                    max_div_ratio = max_div_ratio.max(wave.div_ratio);
                    max_drift = max_drift.max(phases[face].drift);
                    correction_re.axpy(1.0, &wave.v.re);
                    correction_im.axpy(1.0, &wave.v.im);
                    for it in amp.window.0..=amp.window.1 {
                        for s in 0..sl {
                            let (ix, iy, iz) = g.spatial_coords(s);
                            let a = amp.a.at(it, ix, iy, iz);
                            let b = amp.b.at(it, ix, iy, iz);
                            if a == [0.0; 3] && b == [0.0; 3] {
                                continue;
                            }
                            let mut q = quad_stress.at6(it, ix, iy, iz);
                            q[0] += a[0] * a[0] + b[0] * b[0];
                            q[1] += a[0] * a[1] + b[0] * b[1];
                            q[2] += a[0] * a[2] + b[0] * b[2];
                            q[3] += a[1] * a[1] + b[1] * b[1];
                            q[4] += a[1] * a[2] + b[1] * b[2];
                            q[5] += a[2] * a[2] + b[2] * b[2];
                            quad_stress.set6(it, ix, iy, iz, q);
                        }
                    }
                    let sup = wave.v.sup_norm();
                    supports.push((idx, support_mask(&wave.v, 1e-13 * sup.max(1e-300))));
                    wave_meta.push((phases[face].dir, phases[face].drift));
                }
            }
        }
    }
    let wave_count = supports.len();

    // Stress cancellation residual over the envelope support.
    let mut stress_residual: f64 = 0.0;
    let mut stress_residual_p0: f64 = 0.0;
    for it in 0..g.nt {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            if !env_mask.get(it, ix, iy, iz) {
                continue;
            }
            let es = input.e_sqrt.at(it, ix, iy, iz);
            let e = es * es;
            let r = input.stress.at6(it, ix, iy, iz);
            let tr3 = (r[0] + r[3] + r[5]) / 3.0;
            let q = quad_stress.at6(it, ix, iy, iz);
            let p0 = -e / 3.0 + tr3;
            for c in 0..6 {
                let diag = if c == 0 || c == 3 || c == 5 { 1.0 } else { 0.0 };
                let prescribed = e / 3.0 * diag - (r[c] - tr3 * diag);
                stress_residual = stress_residual.max((q[c] - prescribed).abs());
                stress_residual_p0 = stress_residual_p0.max((q[c] + p0 * diag + r[c]).abs());
            }
        }
    }

    // Gradient floors from measured drifts: a wave pair can only interact
    // when the cells are lattice-adjacent, and there
    // `|∇(ξ_I + ξ_J)| ≥ |d_I + d_J| − drift_I − drift_J`.
    let mut min_single_grad = f64::INFINITY;
    let mut min_pair_grad = f64::INFINITY;
    for (i, (idx_i, _)) in supports.iter().enumerate() {
        let (di, drift_i) = wave_meta[i];
        min_single_grad = min_single_grad.min(1.0 - drift_i);
        for (j, (idx_j, _)) in supports.iter().enumerate().skip(i + 1) {
            if (idx_i.k[0] - idx_j.k[0]).abs() > 1
                || (idx_i.k[1] - idx_j.k[1]).abs() > 1
                || (idx_i.k[2] - idx_j.k[2]).abs() > 1
                || (idx_i.k[3] - idx_j.k[3]).abs() > 1
            {
                continue;
            }
            if idx_i.k == idx_j.k && idx_j.face == (idx_i.face ^ 1) {
                continue;
            }
            let (dj, drift_j) = wave_meta[j];
            let sep = norm3([di[0] + dj[0], di[1] + dj[1], di[2] + dj[2]]);
            min_pair_grad = min_pair_grad.min(sep - drift_i - drift_j);
        }
    }

    let masks: Vec<SpaceTimeMask> = supports.iter().map(|(_, m)| m.clone()).collect();
    let interactions = check_limited_interactions(&masks, 16 * 12);

    Ok(WaveEnsemble {
        correction: correction_re,
        imag_residual: correction_im.sup_norm(),
        stress_residual,
        stress_residual_p0,
        stress_scale: e_sup,
        supports,
        wave_count,
        min_single_grad,
        min_pair_grad,
        interactions,
        max_gamma_residual,
        max_div_ratio,
        max_drift,
        cutoffs,
    })
}
