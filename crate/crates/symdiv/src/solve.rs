//! Compactly supported solutions of the divergence and symmetric divergence
//! equations by averaged cone integrals.
//!
//! Both solvers share the same two-piece quadrature of the homogeneity
//! parameter `sigma` on (0, 1):
//!
//! * on `sigma <= 1/2` the inner integral is written over the data points
//!   `z = (x - y)/sigma + y` (lattice sum, no interpolation; the weight is
//!   evaluated analytically at `y = (x - sigma z)/(1 - sigma)`, and the
//!   Jacobian factor `(1 - sigma)^-3` stays bounded);
//! * on `sigma > 1/2` the inner integral is kept over the weight points `y`
//!   (lattice sum over the weight's small ball; the data is interpolated at
//!   `z`, and `sigma^-3` stays bounded).
//!
//! Each piece uses Gauss-Legendre in `sigma`. Every sample point `x` of a
//! nonzero output is a convex combination `sigma z + (1 - sigma) y` of a data
//! point and a weight point, so compact support in the weight's ball is exact.

use crate::quad::gauss_legendre;
use crate::zeta::{SymDivError, TranslationWeight};
use fields_core::{sym_div, ScalarField, SymmetricTensorField, VectorField};
use flow_geometry::SpaceTimeMask;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct SymDivOptions {
    /// Gauss-Legendre nodes per sigma piece.
    pub gl_nodes: usize,
    /// Multiplier on the moment-defect gate (1 = strict).
    pub moment_tol_factor: f64,
}

impl Default for SymDivOptions {
    fn default() -> Self {
        SymDivOptions {
            gl_nodes: 32,
            moment_tol_factor: 1.0,
        }
    }
}

/// Output of the symmetric-divergence solver.
pub struct SymDivSolution {
    /// The full tensor, sum of the three parts.
    pub r: SymmetricTensorField,
    /// The mass part and the two weight-gradient parts, kept separately.
    pub parts: [SymmetricTensorField; 3],
    /// Relative L2 residual of `div R - U` over the weight's time window.
    pub residual_rel_l2: f64,
    /// Ball-per-slice support mask (weight radius plus one cell).
    pub support: SpaceTimeMask,
}

/// One supported data node, in centre-relative coordinates.
struct SuppNode {
    d: [f64; 3],
    u: [f64; 3],
    w: f64,
}

/// Collect the nonzero data nodes of slice `it` relative to the weight
/// centre, erroring if any lie outside the weight's ball.
fn support_nodes(
    u: &VectorField,
    zeta: &TranslationWeight,
    it: usize,
    floor: f64,
) -> Result<Vec<SuppNode>, SymDivError> {
    let g = u.grid();
    let c = zeta.center(it);
    let rho = zeta.rho();
    let cell = (g.dx(0).powi(2) + g.dx(1).powi(2) + g.dx(2).powi(2)).sqrt();
    let mut out = Vec::new();
    let mut strays = 0usize;
    for s in 0..g.slice_len() {
        let (ix, iy, iz) = g.spatial_coords(s);
        let v = u.at(it, ix, iy, iz);
        let mag = v[0].abs().max(v[1].abs()).max(v[2].abs());
        if mag <= floor {
            continue;
        }
        let d = g.displacement([g.x(0, ix), g.x(1, iy), g.x(2, iz)], c);
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() > rho + cell {
            strays += 1;
            continue;
        }
        out.push(SuppNode {
            d,
            u: v,
            w: g.quad_weight(s),
        });
    }
    if strays > 0 {
        return Err(SymDivError::SupportViolation { it, count: strays });
    }
    Ok(out)
}

/// Linear and angular (about the weight centre) moments of one slice.
fn slice_moments(nodes: &[SuppNode]) -> ([f64; 3], [f64; 3], f64) {
    let mut lin = [0.0; 3];
    let mut ang = [0.0; 3];
    let mut l1 = 0.0;
    for n in nodes {
        for c in 0..3 {
            lin[c] += n.w * n.u[c];
        }
        ang[0] += n.w * (n.d[1] * n.u[2] - n.d[2] * n.u[1]);
        ang[1] += n.w * (n.d[2] * n.u[0] - n.d[0] * n.u[2]);
        ang[2] += n.w * (n.d[0] * n.u[1] - n.d[1] * n.u[0]);
        l1 += n.w * (n.u[0] * n.u[0] + n.u[1] * n.u[1] + n.u[2] * n.u[2]).sqrt();
    }
    (lin, ang, l1)
}

fn gate_moments(
    nodes: &[SuppNode],
    zeta: &TranslationWeight,
    it: usize,
    check_angular: bool,
    factor: f64,
    l1_scale: f64,
) -> Result<(), SymDivError> {
    let (lin, ang, l1) = slice_moments(nodes);
    if l1 == 0.0 {
        return Ok(());
    }
    // Tolerances scale with the largest slice of the slab so that slices
    // holding only rounding noise are not rejected for their own noise.
    let l1 = l1.max(l1_scale);
    let lin_tol = factor * 1e-8 * l1;
    let ang_tol = factor * 1e-8 * l1 * zeta.rho();
    let lin_bad = lin.iter().any(|v| v.abs() > lin_tol);
    let ang_bad = check_angular && ang.iter().any(|v| v.abs() > ang_tol);
    if lin_bad || ang_bad {
        return Err(SymDivError::MomentDefect {
            it,
            linear: lin,
            angular: ang,
            lin_tol,
            ang_tol,
        });
    }
    Ok(())
}

/// Evaluate the cone integral at one output point `x` (centre-relative),
/// calling `acc(zeta, grad_zeta, a, u, measure)` for every quadrature sample,
/// where `a = (x - y)/sigma` is the scaled offset of the formulas.
#[inline]
fn cone_quadrature<const N: usize>(
    x: [f64; 3],
    k: usize,
    it: usize,
    zeta: &TranslationWeight,
    supp: &[SuppNode],
    yg: &[(f64, f64)],
    zg: &[(f64, f64)],
    u_slice: &dyn Fn([f64; 3]) -> [f64; 3],
    ynodes: &[([f64; 3], f64)],
    rho: f64,
    cell: f64,
    acc: impl Fn(f64, [f64; 3], [f64; 3], [f64; 3], f64, &mut [f64; N]),
) -> [f64; N] {
    let mut out = [0.0; N];
    // sigma <= 1/2: lattice sum over the data nodes.
    for &(sig, wq) in zg {
        let om = 1.0 - sig;
        let jac = wq / (om * om * om);
        for n in supp {
            let y = [
                (x[0] - sig * n.d[0]) / om,
                (x[1] - sig * n.d[1]) / om,
                (x[2] - sig * n.d[2]) / om,
            ];
            let (zv, zgrad) = zeta.eval_rel(k, y);
            if zv == 0.0 && zgrad == [0.0; 3] {
                continue;
            }
            let a = [
                (n.d[0] - x[0]) / om,
                (n.d[1] - x[1]) / om,
                (n.d[2] - x[2]) / om,
            ];
            acc(zv, zgrad, a, n.u, jac * n.w, &mut out);
        }
    }
    // sigma > 1/2: lattice sum over the weight nodes, data interpolated.
    let reach = rho + cell;
    let _ = it;
    for &(sig, wq) in yg {
        let jac = wq / (sig * sig * sig);
        for &(y, wy) in ynodes {
            let a = [
                (x[0] - y[0]) / sig,
                (x[1] - y[1]) / sig,
                (x[2] - y[2]) / sig,
            ];
            let z = [a[0] + y[0], a[1] + y[1], a[2] + y[2]];
            if (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt() > reach {
                continue;
            }
            let uv = u_slice(z);
            if uv == [0.0; 3] {
                continue;
            }
            let (zv, zgrad) = zeta.eval_rel(k, y);
            acc(zv, zgrad, a, uv, jac * wy, &mut out);
        }
    }
    out
}

/// Weight lattice nodes of slice `it` in centre-relative coordinates.
fn weight_nodes(zeta: &TranslationWeight, it: usize) -> Vec<([f64; 3], f64)> {
    let g = zeta.grid();
    let c = zeta.center(it);
    let rho = zeta.rho();
    let mut out = Vec::new();
    for s in 0..g.slice_len() {
        let (ix, iy, iz) = g.spatial_coords(s);
        let d = g.displacement([g.x(0, ix), g.x(1, iy), g.x(2, iz)], c);
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() < rho {
            out.push((d, g.quad_weight(s)));
        }
    }
    out
}

/// Output lattice nodes of slice `it` within the weight ball, as
/// `(slice-node index, centre-relative position)`.
fn output_nodes(zeta: &TranslationWeight, it: usize) -> Vec<(usize, [f64; 3])> {
    let g = zeta.grid();
    let c = zeta.center(it);
    let rho = zeta.rho();
    let mut out = Vec::new();
    for s in 0..g.slice_len() {
        let (ix, iy, iz) = g.spatial_coords(s);
        let d = g.displacement([g.x(0, ix), g.x(1, iy), g.x(2, iz)], c);
        if (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() <= rho {
            out.push((s, d));
        }
    }
    out
}

/// Ball-per-slice support mask of the weight's cylinder plus one cell.
pub fn cylinder_mask(zeta: &TranslationWeight) -> SpaceTimeMask {
    let g = zeta.grid().clone();
    let (lo, hi) = zeta.window();
    let cell = (g.dx(0).powi(2) + g.dx(1).powi(2) + g.dx(2).powi(2)).sqrt();
    let mut mask = SpaceTimeMask::empty(&g);
    for it in lo..=hi {
        let c = zeta.center(it);
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            let p = [g.x(0, ix), g.x(1, iy), g.x(2, iz)];
            if g.distance(p, c) <= zeta.rho() + cell {
                mask.set(it, ix, iy, iz, true);
            }
        }
    }
    mask
}

/// Solve `div R = U` for a compactly supported vector field `R` at slice
/// `it`, averaging over the weight. Requires `int U = 0`.
pub fn scalar_bogovskii(
    u: &ScalarField,
    zeta: &TranslationWeight,
    it: usize,
    opts: &SymDivOptions,
) -> Result<VectorField, SymDivError> {
    let g = u.grid().clone();
    if !std::ptr::eq(
        std::sync::Arc::as_ptr(&g),
        std::sync::Arc::as_ptr(zeta.grid()),
    ) && (g.n != zeta.grid().n || g.nt != zeta.grid().nt)
    {
        return Err(SymDivError::GridMismatch);
    }
    u.validate()?;
    if !zeta.in_window(it) {
        return Err(SymDivError::EmptyWindow);
    }
    // Reuse the vector machinery with the scalar in slot 0.
    let uvec = promote_scalar(u, it);
    let supp = support_nodes(&uvec, zeta, it, 0.0)?;
    gate_moments(&supp, zeta, it, false, opts.moment_tol_factor, 0.0)?;

    let k = it - zeta.window().0;
    let zg = gauss_legendre(opts.gl_nodes, 0.0, 0.5);
    let yg = gauss_legendre(opts.gl_nodes, 0.5, 1.0);
    let ynodes = weight_nodes(zeta, it);
    let outs = output_nodes(zeta, it);
    let rho = zeta.rho();
    let cell = (g.dx(0).powi(2) + g.dx(1).powi(2) + g.dx(2).powi(2)).sqrt();
    let c = zeta.center(it);
    let tslice = g.t(it);
    let sample = |z: [f64; 3]| uvec.sample(tslice, [z[0] + c[0], z[1] + c[1], z[2] + c[2]]);

    let vals: Vec<(usize, [f64; 3])> = outs
        .par_iter()
        .map(|&(s, x)| {
            let v = cone_quadrature::<3>(
                x,
                k,
                it,
                zeta,
                &supp,
                &yg,
                &zg,
                &sample,
                &ynodes,
                rho,
                cell,
                |zv, _zgrad, a, uv, m, out| {
                    let f = -zv * uv[0] * m;
                    out[0] += f * a[0];
                    out[1] += f * a[1];
                    out[2] += f * a[2];
                },
            );
            (s, v)
        })
        .collect();

    let mut r = VectorField::zeros(&g);
    for (s, v) in vals {
        let (ix, iy, iz) = g.spatial_coords(s);
        r.set(it, ix, iy, iz, v);
    }
    Ok(r)
}

fn promote_scalar(u: &ScalarField, it: usize) -> VectorField {
    let g = u.grid().clone();
    let mut v = VectorField::zeros(&g);
    for s in 0..g.slice_len() {
        let (ix, iy, iz) = g.spatial_coords(s);
        v.set(it, ix, iy, iz, [u.at(it, ix, iy, iz), 0.0, 0.0]);
    }
    v
}

/// Solve the symmetric divergence equation `d_j R^{jl} = U^l` on the weight's
/// time window. Requires vanishing linear and angular moments per slice.
pub fn symdiv_solve(
    u: &VectorField,
    zeta: &TranslationWeight,
    opts: &SymDivOptions,
) -> Result<SymDivSolution, SymDivError> {
    let g = u.grid().clone();
    if g.n != zeta.grid().n || g.nt != zeta.grid().nt {
        return Err(SymDivError::GridMismatch);
    }
    u.validate()?;
    let (lo, hi) = zeta.window();

    // Data outside the window must vanish (support precondition in time).
    let sup = u.sup_norm();
    for it in (0..g.nt).filter(|it| !zeta.in_window(*it)) {
        let mut strays = 0usize;
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            let v = u.at(it, ix, iy, iz);
            if v[0].abs().max(v[1].abs()).max(v[2].abs()) > 1e-12 * sup {
                strays += 1;
            }
        }
        if strays > 0 {
            return Err(SymDivError::SupportViolation { it, count: strays });
        }
    }

    let mut parts = [
        SymmetricTensorField::zeros(&g),
        SymmetricTensorField::zeros(&g),
        SymmetricTensorField::zeros(&g),
    ];
    let zg = gauss_legendre(opts.gl_nodes, 0.0, 0.5);
    let yg = gauss_legendre(opts.gl_nodes, 0.5, 1.0);
    let rho = zeta.rho();
    let cell = (g.dx(0).powi(2) + g.dx(1).powi(2) + g.dx(2).powi(2)).sqrt();

    let supports: Vec<Vec<SuppNode>> = (lo..=hi)
        .map(|it| support_nodes(u, zeta, it, 0.0))
        .collect::<Result<_, _>>()?;
    let l1_scale = supports
        .iter()
        .map(|s| slice_moments(s).2)
        .fold(0.0, f64::max);

    for it in lo..=hi {
        let supp = &supports[it - lo];
        if supp.is_empty() {
            continue;
        }
        gate_moments(supp, zeta, it, true, opts.moment_tol_factor, l1_scale)?;
        let k = it - lo;
        let ynodes = weight_nodes(zeta, it);
        let outs = output_nodes(zeta, it);
        let c = zeta.center(it);
        let tslice = g.t(it);
        let sample = |z: [f64; 3]| u.sample(tslice, [z[0] + c[0], z[1] + c[1], z[2] + c[2]]);

        // 18 accumulators: three parts times six tensor components, packed
        // (xx, xy, xz, yy, yz, zz) to match the tensor storage.
        let vals: Vec<(usize, [f64; 18])> = outs
            .par_iter()
            .map(|&(s, x)| {
                let v = cone_quadrature::<18>(
                    x,
                    k,
                    it,
                    zeta,
                    &supp,
                    &yg,
                    &zg,
                    &sample,
                    &ynodes,
                    rho,
                    cell,
                    |zv, zgrad, a, uv, m, out| {
                        // Symmetrized dyads of the scaled offset with the data.
                        let sym = [
                            2.0 * a[0] * uv[0],
                            a[0] * uv[1] + a[1] * uv[0],
                            a[0] * uv[2] + a[2] * uv[0],
                            2.0 * a[1] * uv[1],
                            a[1] * uv[2] + a[2] * uv[1],
                            2.0 * a[2] * uv[2],
                        ];
                        let aa = [
                            a[0] * a[0],
                            a[0] * a[1],
                            a[0] * a[2],
                            a[1] * a[1],
                            a[1] * a[2],
                            a[2] * a[2],
                        ];
                        let adg = a[0] * zgrad[0] + a[1] * zgrad[1] + a[2] * zgrad[2];
                        let udg = uv[0] * zgrad[0] + uv[1] * zgrad[1] + uv[2] * zgrad[2];
                        let f0 = -1.5 * zv * m;
                        let f1 = 0.5 * adg * m;
                        let f2 = -udg * m;
                        for c in 0..6 {
                            out[c] += f0 * sym[c];
                            out[6 + c] += f1 * sym[c];
                            out[12 + c] += f2 * aa[c];
                        }
                    },
                );
                (s, v)
            })
            .collect();

        for (s, v) in vals {
            let (ix, iy, iz) = g.spatial_coords(s);
            for p in 0..3 {
                let mut six = [0.0; 6];
                six.copy_from_slice(&v[6 * p..6 * p + 6]);
                parts[p].set6(it, ix, iy, iz, six);
            }
        }
    }

    let mut r = parts[0].clone();
    r.axpy(1.0, &parts[1]);
    r.axpy(1.0, &parts[2]);

    // Closure residual over the window, relative to the data size.
    let div = sym_div(&r)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for it in lo..=hi {
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            let dv = div.at(it, ix, iy, iz);
            let uv = u.at(it, ix, iy, iz);
            let w = g.quad_weight(s);
            for c in 0..3 {
                num += w * (dv[c] - uv[c]) * (dv[c] - uv[c]);
                den += w * uv[c] * uv[c];
            }
        }
    }
    let residual_rel_l2 = if den > 0.0 { (num / den).sqrt() } else { 0.0 };

    Ok(SymDivSolution {
        r,
        parts,
        residual_rel_l2,
        support: cylinder_mask(zeta),
    })
}
