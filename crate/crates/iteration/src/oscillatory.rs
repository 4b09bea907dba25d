//! Finite parametrix for the symmetric divergence equation with an
//! oscillatory right-hand side `U = e^{iλ(ξ+c)} u`.
//!
//! Each order applies the pointwise tensor-valued map `q(∇ξ)[u]` solving
//! the underdetermined linear equation `i ∂_jξ q^{jl} = u^l`, then feeds
//! the divergence of the result back as the next amplitude:
//! `u_{(k+1)} = −λ⁻¹ ∂_j q_{(k)}^{jl}`.  The orders telescope, so after
//! the last retained order the unabsorbed force `e^{iλξ} u_{(K+1)}` is
//! closed exactly by the compact-support divergence solver.  When the
//! series stops contracting (amplitude gradients comparable to `λ` times
//! the phase-gradient floor) it is truncated at its smallest term.

use std::sync::Arc;

use fields_core::{
    deriv::sym_div, ComplexVectorField, Grid, ScalarField, SymmetricTensorField, VectorField,
};
use symdiv::{symdiv_solve, SymDivOptions, TranslationWeight};

use crate::patch::{sym_div_patch, CPatch, PatchBox, RPatch};
use crate::IterationError;

/// One oscillatory force `e^{iλ(ξ + offset)} u` with slowly varying
/// complex amplitude `u`.  Phase values and gradients are borrowed (they
/// are shared between all waves of one transport group) and must be
/// valid on the amplitude's whole box.  `floor` is the guaranteed lower
/// bound on `|∇ξ|` over the amplitude support.
pub struct OscillatoryForce<'a> {
    pub xi: &'a RPatch<1>,
    pub grad: &'a RPatch<3>,
    pub u: CPatch<3>,
    pub lambda: f64,
    pub offset: f64,
    pub floor: f64,
    /// Grid spacings, needed for the divergence recursion.
    pub h: [f64; 3],
}

/// Expansion output: accumulated amplitude-level tensor `Σ_k q_{(k)}`
/// (the oscillatory solution is `λ⁻¹ e^{iλξ} Σ_k q_{(k)}`), the residual
/// amplitude left for the exact solver, and per-order sup norms.
pub struct ParametrixExpansion {
    pub q: CPatch<6>,
    pub remainder_u: CPatch<3>,
    pub term_sups: Vec<f64>,
    pub remainder_sup: f64,
    pub min_grad: f64,
    /// Orders actually retained (less than requested when the series was
    /// truncated at its smallest term).
    pub depth_used: usize,
    pub truncated: bool,
    pub lambda: f64,
    pub offset: f64,
}

#[inline]
fn qmap_node(g: [f64; 3], ure: [f64; 3], uim: [f64; 3]) -> ([f64; 6], [f64; 6]) {
    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    // Parallel coefficient (u·g)/|g|², complex.
    let pre = (ure[0] * g[0] + ure[1] * g[1] + ure[2] * g[2]) / g2;
    let pim = (uim[0] * g[0] + uim[1] * g[1] + uim[2] * g[2]) / g2;
    // Perpendicular part u⊥ = u − ((u·g)/|g|²) g.
    let upre = [ure[0] - pre * g[0], ure[1] - pre * g[1], ure[2] - pre * g[2]];
    let upim = [uim[0] - pim * g[0], uim[1] - pim * g[1], uim[2] - pim * g[2]];
    // s = q⊥ + q∥ with q⊥ = (g⊗u⊥ + u⊥⊗g)/|g|², q∥ = ((u·g)/|g|²) δ.
    const PAIR: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut sre = [0.0; 6];
    let mut sim = [0.0; 6];
    for (c, &(j, l)) in PAIR.iter().enumerate() {
        sre[c] = (g[j] * upre[l] + g[l] * upre[j]) / g2;
        sim[c] = (g[j] * upim[l] + g[l] * upim[j]) / g2;
        if j == l {
            sre[c] += pre;
            sim[c] += pim;
        }
    }
    // q = −i s.
    let mut qre = [0.0; 6];
    let mut qim = [0.0; 6];
    for c in 0..6 {
        qre[c] = sim[c];
        qim[c] = -sre[c];
    }
    (qre, qim)
}

/// Run the expansion up to `depth` orders on the force's box.
///
/// The box must carry enough margin that the support, which grows by two
/// cells of divergence stencil per order, never reaches the box edge.
pub fn parametrix_expand(
    force: &OscillatoryForce,
    depth: usize,
) -> Result<ParametrixExpansion, IterationError> {
    let bx = force.u.bx();
    let mut q_acc = CPatch::<6>::zeros(bx);
    let mut u_cur = force.u.clone();
    let mut term_sups: Vec<f64> = Vec::with_capacity(depth);
    let mut min_grad = f64::INFINITY;
    let mut truncated = false;
    let usup0 = u_cur.sup_norm();
    let tiny = 1e-300f64.max(1e-15 * usup0);

    for k in 0..depth {
        let mut q_k = CPatch::<6>::zeros(bx);
        let mut sup: f64 = 0.0;
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        let (ure, uim) = u_cur.get(it, ix, iy, iz);
                        let mag = (0..3)
                            .map(|c| ure[c] * ure[c] + uim[c] * uim[c])
                            .sum::<f64>()
                            .sqrt();
                        if mag <= tiny {
                            continue;
                        }
                        let g = force.grad.get(it, ix, iy, iz);
                        let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                        min_grad = min_grad.min(gn);
                        if gn < force.floor {
                            return Err(IterationError::PhaseFloor {
                                value: gn,
                                floor: force.floor,
                            });
                        }
                        let (qre, qim) = qmap_node(g, ure, uim);
                        for c in 0..6 {
                            sup = sup.max((qre[c] * qre[c] + qim[c] * qim[c]).sqrt());
                        }
                        q_k.set(it, ix, iy, iz, qre, qim);
                    }
                }
            }
        }
        // Optimal truncation: once an order stops shrinking the series is
        // asymptotic, and the smallest term is where to cut.
        if k > 0 && sup > term_sups[k - 1] {
            truncated = true;
            break;
        }
        term_sups.push(sup);
        for (a, b) in q_acc.re.data.iter_mut().zip(&q_k.re.data) {
            *a += b;
        }
        for (a, b) in q_acc.im.data.iter_mut().zip(&q_k.im.data) {
            *a += b;
        }
        let mut div = sym_div_patch(&q_k, force.h);
        div.re.scale(-1.0 / force.lambda);
        div.im.scale(-1.0 / force.lambda);
        u_cur = div;
    }
    let remainder_sup = u_cur.sup_norm();
    Ok(ParametrixExpansion {
        q: q_acc,
        remainder_u: u_cur,
        depth_used: term_sups.len(),
        term_sups,
        remainder_sup,
        min_grad,
        truncated,
        lambda: force.lambda,
        offset: force.offset,
    })
}

impl ParametrixExpansion {
    /// Accumulate the oscillatory solution `λ⁻¹ e^{iλ(ξ+offset)} Σq_{(k)}`
    /// into full-grid real/imaginary tensor accumulators.
    pub fn add_solution(
        &self,
        xi: &RPatch<1>,
        acc_re: &mut SymmetricTensorField,
        acc_im: &mut SymmetricTensorField,
    ) {
        let bx = self.q.bx();
        let inv = 1.0 / self.lambda;
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        let (qre, qim) = self.q.get(it, ix, iy, iz);
                        if qre == [0.0; 6] && qim == [0.0; 6] {
                            continue;
                        }
                        let ph = self.lambda * (xi.get(it, ix, iy, iz)[0] + self.offset);
                        let (sn, cs) = ph.sin_cos();
                        let mut re = acc_re.at6(it, ix, iy, iz);
                        let mut im = acc_im.at6(it, ix, iy, iz);
                        for c in 0..6 {
                            re[c] += inv * (cs * qre[c] - sn * qim[c]);
                            im[c] += inv * (sn * qre[c] + cs * qim[c]);
                        }
                        acc_re.set6(it, ix, iy, iz, re);
                        acc_im.set6(it, ix, iy, iz, im);
                    }
                }
            }
        }
    }

    /// Accumulate the unabsorbed force `e^{iλ(ξ+offset)} u_{(K+1)}` into a
    /// full-grid complex accumulator (for the batched closure solve).
    pub fn add_remainder(&self, xi: &RPatch<1>, acc: &mut ComplexVectorField) {
        let bx = self.remainder_u.bx();
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        let (ure, uim) = self.remainder_u.get(it, ix, iy, iz);
                        if ure == [0.0; 3] && uim == [0.0; 3] {
                            continue;
                        }
                        let ph = self.lambda * (xi.get(it, ix, iy, iz)[0] + self.offset);
                        let (sn, cs) = ph.sin_cos();
                        let mut re = acc.re.at(it, ix, iy, iz);
                        let mut im = acc.im.at(it, ix, iy, iz);
                        for c in 0..3 {
                            re[c] += cs * ure[c] - sn * uim[c];
                            im[c] += sn * ure[c] + cs * uim[c];
                        }
                        acc.re.set(it, ix, iy, iz, re);
                        acc.im.set(it, ix, iy, iz, im);
                    }
                }
            }
        }
    }
}

/// Full solve of `∂_j Q^{jl} = Re(e^{iλξ}u)^l` on a grid: expansion plus
/// the exact closure of the real remainder by the divergence solver.
pub struct ParametrixSolution {
    pub expansion_sups: Vec<f64>,
    pub remainder_sup: f64,
    pub depth_used: usize,
    /// Oscillatory part, real and imaginary.
    pub q_re: SymmetricTensorField,
    pub q_im: SymmetricTensorField,
    /// Exact closure of the real remainder force.
    pub q_tilde: SymmetricTensorField,
    /// Relative L² residual of `div(q_re + q_tilde) − Re U`.
    pub residual_rel_l2: f64,
    /// Sup of the imaginary remainder left unsolved (conjugate-pair
    /// symmetric inputs drive it to roundoff).
    pub imag_remainder_sup: f64,
}

/// Solve on the full grid: `u`, `xi`, `grad` as grid fields, closure over
/// the given translation weight.
#[allow(clippy::too_many_arguments)]
pub fn parametrix_solve(
    grid: &Arc<Grid>,
    u: &ComplexVectorField,
    xi: &ScalarField,
    grad: &VectorField,
    lambda: f64,
    floor: f64,
    depth: usize,
    zeta: &TranslationWeight,
    opts: &SymDivOptions,
) -> Result<ParametrixSolution, IterationError> {
    let bx = PatchBox {
        t0: 0,
        t1: grid.nt - 1,
        lo: [0; 3],
        hi: [grid.n[0] - 1, grid.n[1] - 1, grid.n[2] - 1],
    };
    let mut up = CPatch::<3>::zeros(bx);
    for it in 0..grid.nt {
        for s in 0..grid.slice_len() {
            let (ix, iy, iz) = grid.spatial_coords(s);
            up.set(
                it,
                ix,
                iy,
                iz,
                u.re.at(it, ix, iy, iz),
                u.im.at(it, ix, iy, iz),
            );
        }
    }
    let xi_p = RPatch::<1>::from_scalar(xi, bx);
    let grad_p = RPatch::<3>::from_vector(grad, bx);
    let force = OscillatoryForce {
        xi: &xi_p,
        grad: &grad_p,
        u: up,
        lambda,
        offset: 0.0,
        floor,
        h: [grid.dx(0), grid.dx(1), grid.dx(2)],
    };
    let exp = parametrix_expand(&force, depth)?;

    let mut q_re = SymmetricTensorField::zeros(grid);
    let mut q_im = SymmetricTensorField::zeros(grid);
    exp.add_solution(&xi_p, &mut q_re, &mut q_im);
    let mut rem = ComplexVectorField::zeros(grid);
    exp.add_remainder(&xi_p, &mut rem);
    let imag_remainder_sup = rem.im.sup_norm();

    let sol = symdiv_solve(&rem.re, zeta, opts)?;

    // Residual of the real part of the closed system.
    let mut total = q_re.clone();
    for c in 0..6 {
        let mut comp = total.component(c);
        comp.axpy(1.0, &sol.r.component(c));
        total.set_component(c, &comp);
    }
    let div = sym_div(&total)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for it in 0..grid.nt {
        for s in 0..grid.slice_len() {
            let (ix, iy, iz) = grid.spatial_coords(s);
            let d = div.at(it, ix, iy, iz);
            let ph = lambda * xi.at(it, ix, iy, iz);
            let (sn, cs) = ph.sin_cos();
            let ure = u.re.at(it, ix, iy, iz);
            let uim = u.im.at(it, ix, iy, iz);
            for c in 0..3 {
                let target = cs * ure[c] - sn * uim[c];
                num += (d[c] - target) * (d[c] - target);
                den += target * target;
            }
        }
    }
    let residual_rel_l2 = if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    };

    Ok(ParametrixSolution {
        expansion_sups: exp.term_sups.clone(),
        remainder_sup: exp.remainder_sup,
        depth_used: exp.depth_used,
        q_re,
        q_im,
        q_tilde: sol.r,
        residual_rel_l2,
        imag_remainder_sup,
    })
}
