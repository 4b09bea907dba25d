//! Diagnostic reports for the symmetric-divergence solver: Lp-Lq gain
//! bounds and commutation with the approximate advective derivative.

use crate::solve::{symdiv_solve, SymDivOptions, SymDivSolution};
use crate::zeta::{SymDivError, TranslationWeight};
use fields_core::{gradient, time_derivative, SymmetricTensorField, VectorField};
use serde::Serialize;

/// Spatial Lp norm of one slice of a multi-component field, p = infinity
/// accepted as `f64::INFINITY`.
fn slice_lp(vals: impl Iterator<Item = (f64, f64)>, p: f64) -> f64 {
    if p.is_infinite() {
        vals.fold(0.0, |m, (_, v)| m.max(v.abs()))
    } else {
        let s: f64 = vals.map(|(w, v)| w * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }
}

fn tensor_ct_lq(r: &SymmetricTensorField, lo: usize, hi: usize, q: f64) -> f64 {
    let g = r.grid();
    (lo..=hi)
        .map(|it| {
            slice_lp(
                (0..g.slice_len()).flat_map(|s| {
                    let (ix, iy, iz) = g.spatial_coords(s);
                    let w = g.quad_weight(s);
                    r.at6(it, ix, iy, iz).into_iter().map(move |v| (w, v))
                }),
                q,
            )
        })
        .fold(0.0, f64::max)
}

fn vector_ct_lp(u: &VectorField, lo: usize, hi: usize, p: f64) -> f64 {
    let g = u.grid();
    (lo..=hi)
        .map(|it| {
            slice_lp(
                (0..g.slice_len()).flat_map(|s| {
                    let (ix, iy, iz) = g.spatial_coords(s);
                    let w = g.quad_weight(s);
                    u.at(it, ix, iy, iz).into_iter().map(move |v| (w, v))
                }),
                p,
            )
        })
        .fold(0.0, f64::max)
}

/// Measured Lp -> Lq behaviour of one solve against the expected
/// `C rho^(1 + d/q - d/p)` gain.
#[derive(Debug, Serialize)]
pub struct SymDivBoundsReport {
    pub p: f64,
    pub q: f64,
    pub admissible: bool,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
    pub expected_gain: f64,
    pub constant: f64,
    pub pass: bool,
}

/// Compare `|R|_q / |U|_p` (both C0 in time over the weight window) against
/// `c_config * rho^(1 + d/q - d/p)`. The exponent pair must satisfy
/// `max(0, d/p - 1) <= d/q <= d/p` strictly away from the critical line.
pub fn verify_symdiv_bounds(
    u: &VectorField,
    sol: &SymDivSolution,
    zeta: &TranslationWeight,
    p: f64,
    q: f64,
    c_config: f64,
) -> SymDivBoundsReport {
    let d = 3.0;
    let dp = if p.is_infinite() { 0.0 } else { d / p };
    let dq = if q.is_infinite() { 0.0 } else { d / q };
    let admissible = (dp - 1.0).max(0.0) <= dq && dq <= dp + 1e-12 && (dp - 1.0 - dq).abs() > 1e-9
        || (dp == 0.0 && dq == 0.0);
    let (lo, hi) = zeta.window();
    let input_norm = vector_ct_lp(u, lo, hi, p);
    let output_norm = tensor_ct_lq(&sol.r, lo, hi, q);
    let ratio = if input_norm > 0.0 {
        output_norm / input_norm
    } else {
        0.0
    };
    let expected_gain = zeta.rho().powf(1.0 + dq - dp);
    SymDivBoundsReport {
        p,
        q,
        admissible,
        input_norm,
        output_norm,
        ratio,
        expected_gain,
        constant: c_config,
        pass: admissible && ratio <= c_config * expected_gain,
    }
}

/// Two-sided evaluation of the commutation of the solver with the
/// approximate advective derivative `d/dt + v_bar(t) . grad`.
#[derive(Debug, Serialize)]
pub struct CommutationReport {
    /// Sup over interior window slices of |D(R[U]) - R[D U]|.
    pub sup_difference: f64,
    /// Size of the compared fields, for scaling the difference.
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Approximate advective derivative of a vector field with the weight's
/// per-slice translation velocity.
pub fn approx_advective_vector(
    u: &VectorField,
    zeta: &TranslationWeight,
) -> Result<VectorField, SymDivError> {
    let g = u.grid().clone();
    let mut out = VectorField::zeros(&g);
    for c in 0..3 {
        let comp = u.component(c);
        let dt = time_derivative(&comp)?;
        let gr = gradient(&comp);
        let (lo, hi) = zeta.window();
        for it in lo..=hi {
            let vb = zeta.v_bar(it);
            for s in 0..g.slice_len() {
                let (ix, iy, iz) = g.spatial_coords(s);
                let gv = gr.at(it, ix, iy, iz);
                let val = dt.at(it, ix, iy, iz) + vb[0] * gv[0] + vb[1] * gv[1] + vb[2] * gv[2];
                let mut cur = out.at(it, ix, iy, iz);
                cur[c] = val;
                out.set(it, ix, iy, iz, cur);
            }
        }
    }
    Ok(out)
}

fn approx_advective_tensor(
    r: &SymmetricTensorField,
    zeta: &TranslationWeight,
) -> Result<SymmetricTensorField, SymDivError> {
    let g = r.grid().clone();
    let mut out = SymmetricTensorField::zeros(&g);
    for c in 0..6 {
        let comp = r.component(c);
        let dt = time_derivative(&comp)?;
        let gr = gradient(&comp);
        let (lo, hi) = zeta.window();
        let mut f = fields_core::ScalarField::zeros(&g);
        for it in lo..=hi {
            let vb = zeta.v_bar(it);
            for s in 0..g.slice_len() {
                let (ix, iy, iz) = g.spatial_coords(s);
                let gv = gr.at(it, ix, iy, iz);
                let val = dt.at(it, ix, iy, iz) + vb[0] * gv[0] + vb[1] * gv[1] + vb[2] * gv[2];
                f.set(it, ix, iy, iz, val);
            }
        }
        out.set_component(c, &f);
    }
    Ok(out)
}

/// Solve for `U`, solve for its approximate advective derivative, and
/// compare `D(R[U])` with `R[D U]` on the interior slices of the window.
pub fn verify_advective_commutation(
    u: &VectorField,
    zeta: &TranslationWeight,
    opts: &SymDivOptions,
    tolerance: f64,
) -> Result<CommutationReport, SymDivError> {
    let sol = symdiv_solve(u, zeta, opts)?;
    let du = approx_advective_vector(u, zeta)?;
    // A static field under a still flow differentiates to pure rounding
    // noise, which no relative moment gate can pass; treat it as zero.
    let noise_floor = 1e-12 * u.sup_norm() / u.grid().dt();
    let sol_du_r = if du.sup_norm() <= noise_floor {
        SymmetricTensorField::zeros(u.grid())
    } else {
        // Time differencing is approximate, so its output carries a small
        // moment defect; gate it loosely.
        let relaxed = SymDivOptions {
            moment_tol_factor: opts.moment_tol_factor * 1e6,
            ..*opts
        };
        symdiv_solve(&du, zeta, &relaxed)?.r
    };
    let d_r = approx_advective_tensor(&sol.r, zeta)?;

    let g = u.grid();
    let (lo, hi) = zeta.window();
    let (ilo, ihi) = (lo.max(1), hi.min(g.nt.saturating_sub(2)));
    let mut sup = 0.0f64;
    let mut reference = 0.0f64;
    for it in ilo..=ihi {
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            let a = d_r.at6(it, ix, iy, iz);
            let b = sol_du_r.at6(it, ix, iy, iz);
            for c in 0..6 {
                sup = sup.max((a[c] - b[c]).abs());
                reference = reference.max(b[c].abs());
            }
        }
    }
    Ok(CommutationReport {
        sup_difference: sup,
        reference,
        tolerance,
        pass: sup <= tolerance,
    })
}
