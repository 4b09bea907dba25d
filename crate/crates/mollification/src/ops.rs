//! Mollification in space and along the flow, and the regularized stress
//! and energy built from it.

use crate::kernel::{KernelSupport, MollError, MollKernel};
use fields_core::{ScalarField, SymmetricTensorField, VectorField};
use flow_geometry::FlowMap;
use rayon::prelude::*;

/// Discrete spatial convolution with a lattice kernel.  Periodic axes
/// wrap; bounded axes use zero extension, matching the compact-support
/// convention of the derivative stencils.
pub fn mollify_space(f: &ScalarField, k: &MollKernel) -> Result<ScalarField, MollError> {
    let offsets = match &k.support {
        KernelSupport::Lattice(o) => o,
        KernelSupport::Time(_) => panic!("spatial mollification needs a lattice kernel"),
    };
    f.validate()?;
    let g = f.grid().clone();
    let h = g.dx(0);
    if k.scale < 2.0 * h {
        return Err(MollError::UnderResolved { scale: k.scale, min: 2.0 * h });
    }
    let mut out = ScalarField::zeros(&g);
    let n = [g.n[0] as i64, g.n[1] as i64, g.n[2] as i64];
    let slice = g.slice_len();
    let src = f.clone();
    out.data_mut()
        .par_chunks_mut(slice)
        .enumerate()
        .for_each(|(it, chunk)| {
            for (s, o) in chunk.iter_mut().enumerate() {
                let (ix, iy, iz) = g.spatial_coords(s);
                let p = [ix as i64, iy as i64, iz as i64];
                let mut acc = 0.0;
                'offs: for (off, w) in offsets.iter().zip(&k.weights) {
                    let mut q = [0usize; 3];
                    for a in 0..3 {
                        let mut i = p[a] + off[a];
                        if g.periodic[a] {
                            i = i.rem_euclid(n[a]);
                        } else if i < 0 || i >= n[a] {
                            continue 'offs; // zero extension
                        }
                        q[a] = i as usize;
                    }
                    acc += w * src.at(it, q[0], q[1], q[2]);
                }
                *o = acc;
            }
        });
    Ok(out)
}

pub fn mollify_space_vector(v: &VectorField, k: &MollKernel) -> Result<VectorField, MollError> {
    let c: Result<Vec<_>, _> = (0..3).map(|i| mollify_space(&v.component(i), k)).collect();
    let c = c?;
    Ok(VectorField::from_components(&c[0], &c[1], &c[2]))
}

pub fn mollify_space_tensor(
    r: &SymmetricTensorField,
    k: &MollKernel,
) -> Result<SymmetricTensorField, MollError> {
    let mut out = SymmetricTensorField::zeros(r.grid());
    for c in 0..6 {
        out.set_component(c, &mollify_space(&r.component(c), k)?);
    }
    Ok(out)
}

/// Mollifier in space and along the flow of a velocity field: spatial
/// scale `eps_x`, advective (time) scale `eps_t`.
pub struct FlowMollifier<'a> {
    pub flow: &'a FlowMap,
    pub eps_t: f64,
    pub eps_x: f64,
    pub time_kernel: MollKernel,
    pub space_kernel: MollKernel,
}

impl<'a> FlowMollifier<'a> {
    pub fn new(
        flow: &'a FlowMap,
        eps_t: f64,
        eps_x: f64,
        moment_order: usize,
        nonnegative: bool,
    ) -> Result<Self, MollError> {
        Ok(FlowMollifier {
            flow,
            eps_t,
            eps_x,
            time_kernel: MollKernel::quad_time(eps_t, moment_order, nonnegative)?,
            space_kernel: MollKernel::lattice_space(flow.grid(), eps_x, moment_order, nonnegative)?,
        })
    }
}

/// Mollify `F` in space and along the flow:
/// `∬ F(Φ_s(t,x) + (0,h)) η_ρ(h) η_τ(s) dh ds`.
///
/// The `h`-integral commutes with the flow composition exactly, so the
/// implementation convolves once in space on the lattice and then
/// integrates the result along each node's trajectory at the time-kernel
/// nodes.  Accepts merely bounded-measurable `F` (indicator fields
/// included).
pub fn mollify_along_flow(f: &ScalarField, m: &FlowMollifier) -> Result<ScalarField, MollError> {
    let g = f.grid().clone();
    let smoothed = mollify_space(f, &m.space_kernel)?;
    let s_nodes = match &m.time_kernel.support {
        KernelSupport::Time(n) => n.clone(),
        KernelSupport::Lattice(_) => panic!("flow mollifier needs a 1-D time kernel"),
    };
    let w = m.time_kernel.weights.clone();
    let mut out = ScalarField::zeros(&g);
    let slice = g.slice_len();
    let escapes: Vec<(usize, usize)> = out
        .data_mut()
        .par_chunks_mut(slice)
        .enumerate()
        .flat_map(|(it, chunk)| {
            let t = g.t(it);
            let mut bad = Vec::new();
            for (s_idx, o) in chunk.iter_mut().enumerate() {
                let x = g.node_pos(s_idx);
                // Walk the trajectory through the time-kernel nodes in
                // ascending order, sampling the spatially mollified field.
                let mut acc = 0.0;
                let mut failed = false;
                let mut pos = x;
                let mut s_cur = 0.0;
                for (j, &sj) in s_nodes.iter().enumerate() {
                    match m.flow.flow_spatial(t + s_cur, pos, sj - s_cur) {
                        Ok(p) => {
                            pos = p;
                            s_cur = sj;
                            acc += w[j] * smoothed.sample(t + sj, pos);
                        }
                        Err(_) => {
                            failed = true;
                            break;
                        }
                    }
                }
                if failed {
                    bad.push((it, s_idx));
                } else {
                    *o = acc;
                }
            }
            bad
        })
        .collect();
    if let Some(&(it, s_idx)) = escapes.first() {
        let (ix, iy, iz) = g.spatial_coords(s_idx);
        return Err(MollError::Escape { count: escapes.len(), it, ix, iy, iz });
    }
    Ok(out)
}

/// Regularized stress `R_ε`: two spatial mollification passes at `eps_x`
/// followed by mollification along the flow, per component.
pub fn regularize_stress(
    r: &SymmetricTensorField,
    m: &FlowMollifier,
) -> Result<SymmetricTensorField, MollError> {
    let mut out = SymmetricTensorField::zeros(r.grid());
    for c in 0..6 {
        let once = mollify_space(&r.component(c), &m.space_kernel)?;
        out.set_component(c, &mollify_along_flow(&once, m)?);
    }
    Ok(out)
}

/// Regularized energy density square root `ẽ^{1/2}`: mollification of
/// `e^{1/2}` in space and along the flow with *nonnegative* kernels, so
/// lower bounds on Eulerian cylinders survive.
pub fn regularize_energy(e_sqrt: &ScalarField, m: &FlowMollifier) -> Result<ScalarField, MollError> {
    if !m.time_kernel.nonnegative || !m.space_kernel.nonnegative {
        return Err(MollError::SignedKernel);
    }
    let out = mollify_along_flow(e_sqrt, m)?;
    // Nonnegative weights on nonnegative input: clamp away roundoff only.
    Ok(out.map(|v| v.max(0.0)))
}

/// One row of a mollification-estimate report: a measured derivative norm
/// against its envelope.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MollEstimateEntry {
    pub label: String,
    pub order: usize,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MollEstimateReport {
    pub entries: Vec<MollEstimateEntry>,
    pub pass: bool,
}

/// Measure `‖∇^m (F mollified)‖` for `1 ≤ m ≤ l` and the advective
/// derivative norms `‖∇^{m-1}(∂_t + v·∇)(F mollified)‖`, and compare with
/// the envelopes `C₁ e^{C₂ Ξ e_v^{1/2} τ} [ρ^{-m} + Ξ^m] ‖F‖∞` and
/// `C₁ e^{C₂ Ξ e_v^{1/2} τ} [ρ^{-(m-1)} + Ξ^{m-1}] τ^{-1} ‖F‖∞`.
#[allow(clippy::too_many_arguments)]
pub fn verify_moll_estimates(
    f: &ScalarField,
    m: &FlowMollifier,
    xi: f64,
    e_v: f64,
    l: usize,
    c1: f64,
    c2: f64,
) -> Result<MollEstimateReport, MollError> {
    let smoothed = mollify_along_flow(f, m)?;
    let sup_f = f.sup_norm();
    let envelope = c2 * xi * e_v.sqrt() * m.eps_t;
    let grow = c1 * envelope.exp();
    let grads = fields_core::derivative_sup_norms(&smoothed, l);
    let mut entries = Vec::new();
    for order in 1..=l {
        let bound = grow * (m.eps_x.powi(-(order as i32)) + xi.powi(order as i32)) * sup_f;
        let measured = grads[order];
        entries.push(MollEstimateEntry {
            label: format!("spatial derivative order {order}"),
            order,
            measured,
            bound,
            pass: measured <= bound,
        });
    }
    let adv = fields_core::advective_derivative_scalar(&smoothed, m.flow.velocity())?;
    let adv_grads = fields_core::derivative_sup_norms(&adv, l.saturating_sub(1));
    for order in 0..l {
        let bound = grow
            * (m.eps_x.powi(-(order as i32)) + xi.powi(order as i32))
            * sup_f
            / m.eps_t;
        let measured = adv_grads[order];
        entries.push(MollEstimateEntry {
            label: format!("advective derivative, spatial order {order}"),
            order,
            measured,
            bound,
            pass: measured <= bound,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(MollEstimateReport { entries, pass })
}
