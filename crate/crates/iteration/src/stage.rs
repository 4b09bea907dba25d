//! One full stage: mollify, gate, superpose waves, and close every
//! oscillatory error term into the next stress ledger.
//!
//! The output state satisfies the same relaxed equation with the stress
//! replaced by the six-term ledger: a mollification term, a low-frequency
//! stress term, a transport term, two interaction terms and the compact
//! remainder closure.  High-frequency forces are absorbed by a finite
//! parametrix expansion on sparse patches; whatever the expansion leaves
//! behind is collected per birth slab and closed exactly by the
//! translated-weight divergence solver.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use fields_core::{
    advective_derivative_vector, deriv_axis, momentum_functionals, ComplexVectorField,
    EulerReynoldsState, FrequencyEnergyLevels, Grid, ScalarField, SymmetricTensorField,
    VectorField,
};
use flow_geometry::{eulerian_cylinder_mask, FlowMap, SpaceTimeMask};
use mollification::{mollify_space_vector, regularize_energy, regularize_stress, FlowMollifier, MollKernel};
use serde::Serialize;
use symdiv::{build_zeta, symdiv_solve, SymDivOptions};
use waves::{
    assemble_wave, build_amplitude, build_cutoffs, companion_face, conjugate_face, init_frame,
    solve_gamma, CutoffSystem, DodecahedralFrame, PhaseFunction, WaveError, WaveIndex,
};

use crate::oscillatory::{parametrix_expand, OscillatoryForce};
use crate::params::{choose_parameters, StageConfig, StageParameters};
use crate::patch::{curl_patch, CPatch, PatchBox, RPatch};
use crate::terms::{
    beltrami_defect_summand, cadd, cdot, compute_q_m, corrector_rotation_summand, cscale,
    principal_corrector_summand, slow_curl_summand, C3,
};
use crate::IterationError;

/// Everything one stage consumes.
pub struct StageInput<'a> {
    pub state: &'a EulerReynoldsState,
    /// Square root of the prescribed energy density to add.
    pub e_sqrt: &'a ScalarField,
    /// Oscillation count `N` (validated against the admissible floor).
    pub n: f64,
    pub config: StageConfig,
}

/// Sup norms of the ledger terms, the assembled stress and its predecessor.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerNorms {
    pub q_m: f64,
    pub q_s: f64,
    pub q_t: f64,
    pub q_h: f64,
    pub q_hp: f64,
    pub q_o: f64,
    pub total: f64,
    pub previous: f64,
}

/// The six stress terms of one stage, kept separately for inspection.
pub struct StressLedger {
    /// Mollification error `(v−v_ε)⊗V + V⊗(v−v_ε) + (R−R_ε)`.
    pub q_m: SymmetricTensorField,
    /// Low-frequency stress: corrector cross terms plus the cancellation
    /// defect `Σ(a⊗a+b⊗b) − ẽ/3·δ + R_ε`.
    pub q_s: SymmetricTensorField,
    /// Absorbed transport forces `e^{iλξ}(D_t ṽ + ṽ·∇v_ε)`.
    pub q_t: SymmetricTensorField,
    /// Absorbed principal interaction forces (Beltrami defect brackets).
    pub q_h: SymmetricTensorField,
    /// Absorbed corrector interaction forces.
    pub q_hp: SymmetricTensorField,
    /// Exact closure of all parametrix remainders, one solve per slab.
    pub q_o: SymmetricTensorField,
    pub norms: LedgerNorms,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageDiagnostics {
    pub wave_count: usize,
    pub pair_count: usize,
    pub self_pair_count: usize,
    pub slab_count: usize,
    pub max_drift: f64,
    pub max_gamma_residual: f64,
    pub max_div_ratio: f64,
    /// Guaranteed floor on `|∇ξ|` met on single-wave supports.
    pub min_single_grad: f64,
    /// Smallest `|∇(ξ_I+ξ_J)|` met on an interacting pair support.
    pub min_pair_grad: f64,
    /// Sup of the imaginary residue of the summed correction.
    pub imag_correction_sup: f64,
    /// Sup of the imaginary parts of the absorbed stress accumulators.
    pub imag_stress_sup: f64,
    pub imag_pressure_sup: f64,
    /// Sup of the stress-cancellation defect over the envelope support.
    pub stress_residual_p0: f64,
    /// Natural scale of that defect (sup of the regularized energy).
    pub stress_scale: f64,
    /// Imaginary residue of each slab's remainder bucket before closure.
    pub imag_bucket_sups: Vec<f64>,
    /// Relative L2 residual of each slab's closure solve.
    pub bucket_residuals: Vec<f64>,
    /// Expansions stopped early at their smallest term.
    pub truncated_expansions: usize,
    pub expansion_count: usize,
    /// Largest `‖u_{(K+1)}‖∞ / ‖u‖∞` over all expansions.
    pub max_remainder_ratio: f64,
    /// Transport force discarded outside the phase windows.
    pub q_t_clip_sup: f64,
    /// Largest linear / angular momentum of the correction over slices,
    /// relative to nothing — raw functional values.
    pub momentum_linear_max: f64,
    pub momentum_angular_max: f64,
    /// `min ẽ − k² e_R` over the advected stress neighbourhood.
    pub energy_margin: f64,
    pub correction_sup: f64,
}

pub struct StageOutput {
    pub state: EulerReynoldsState,
    pub params: StageParameters,
    /// The real velocity correction that was added.
    pub correction: VectorField,
    /// `p₁ − p`.
    pub pressure_correction: ScalarField,
    pub ledger: StressLedger,
    pub diagnostics: StageDiagnostics,
}

/// Shared phase data of one `(birth, class, face)` group, materialized as
/// patches over the full spatial box on the phase window.
struct GroupPhase {
    xi: RPatch<1>,
    grad: RPatch<3>,
}

/// One retained wave: sparse principal amplitude and corrector patches.
struct StageWave {
    idx: WaveIndex,
    group: usize,
    /// Phase offset folding the birth point into the shared group phase.
    offset: f64,
    /// Union bounding box of both patches.
    bx: PatchBox,
    /// Principal complex amplitude `a + ib`.
    v: CPatch<3>,
    /// Lower-order corrector amplitude `δv`.
    dv: CPatch<3>,
}

struct SlabWaves {
    k0: i64,
    waves: Vec<StageWave>,
    groups: Vec<GroupPhase>,
}

/// Running accumulators of one stage.
struct Acc {
    correction_re: VectorField,
    correction_im: VectorField,
    quad: SymmetricTensorField,
    q_s: SymmetricTensorField,
    q_t_re: SymmetricTensorField,
    q_t_im: SymmetricTensorField,
    q_h_re: SymmetricTensorField,
    q_h_im: SymmetricTensorField,
    q_hp_re: SymmetricTensorField,
    q_hp_im: SymmetricTensorField,
    pressure_re: ScalarField,
    pressure_im: ScalarField,
    /// Unabsorbed oscillatory forces, bucketed by birth slab.
    buckets: BTreeMap<i64, ComplexVectorField>,
}

impl Acc {
    fn new(g: &Arc<Grid>) -> Acc {
        Acc {
            correction_re: VectorField::zeros(g),
            correction_im: VectorField::zeros(g),
            quad: SymmetricTensorField::zeros(g),
            q_s: SymmetricTensorField::zeros(g),
            q_t_re: SymmetricTensorField::zeros(g),
            q_t_im: SymmetricTensorField::zeros(g),
            q_h_re: SymmetricTensorField::zeros(g),
            q_h_im: SymmetricTensorField::zeros(g),
            q_hp_re: SymmetricTensorField::zeros(g),
            q_hp_im: SymmetricTensorField::zeros(g),
            pressure_re: ScalarField::zeros(g),
            pressure_im: ScalarField::zeros(g),
            buckets: BTreeMap::new(),
        }
    }
}

struct DiagAcc {
    wave_count: usize,
    pair_count: usize,
    self_pair_count: usize,
    max_drift: f64,
    max_gamma_residual: f64,
    max_div_ratio: f64,
    min_single_grad: f64,
    min_pair_grad: f64,
    truncated: usize,
    expansions: usize,
    max_remainder_ratio: f64,
    q_t_clip_sup: f64,
}

impl DiagAcc {
    fn new() -> DiagAcc {
        DiagAcc {
            wave_count: 0,
            pair_count: 0,
            self_pair_count: 0,
            max_drift: 0.0,
            max_gamma_residual: 0.0,
            max_div_ratio: 0.0,
            min_single_grad: f64::INFINITY,
            min_pair_grad: f64::INFINITY,
            truncated: 0,
            expansions: 0,
            max_remainder_ratio: 0.0,
            q_t_clip_sup: 0.0,
        }
    }

    fn note_expansion(&mut self, truncated: bool, remainder_sup: f64, force_sup: f64) {
        self.expansions += 1;
        if truncated {
            self.truncated += 1;
        }
        if force_sup > 0.0 {
            self.max_remainder_ratio = self.max_remainder_ratio.max(remainder_sup / force_sup);
        }
    }
}

/// Immutable per-stage context handed to the slab builder.
struct StageCtx<'a> {
    g: Arc<Grid>,
    h: [f64; 3],
    cfg: &'a StageConfig,
    params: &'a StageParameters,
    frame: &'a DodecahedralFrame,
    cutoffs: &'a CutoffSystem,
    env_mask: &'a SpaceTimeMask,
    eps: &'a SymmetricTensorField,
    e_sqrt_reg: &'a ScalarField,
    v_eps: &'a VectorField,
    /// `∂_a v_ε` for the stretching part of the transport force.
    dve: &'a [VectorField; 3],
}

const PAIR6: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Tight bounding box of the joint support of `fields` over `window`.
fn support_bbox(
    g: &Arc<Grid>,
    fields: &[&VectorField],
    window: (usize, usize),
) -> Option<PatchBox> {
    let sl = g.slice_len();
    let mut t0 = usize::MAX;
    let mut t1 = 0usize;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut any = false;
    for it in window.0..=window.1 {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let nz = fields.iter().any(|f| f.at(it, ix, iy, iz) != [0.0; 3]);
            if !nz {
                continue;
            }
            any = true;
            t0 = t0.min(it);
            t1 = t1.max(it);
            for (a, &i) in [ix, iy, iz].iter().enumerate() {
                lo[a] = lo[a].min(i);
                hi[a] = hi[a].max(i);
            }
        }
    }
    if !any {
        return None;
    }
    Some(PatchBox { t0, t1, lo, hi })
}

fn box_union(a: &PatchBox, b: &PatchBox) -> PatchBox {
    PatchBox {
        t0: a.t0.min(b.t0),
        t1: a.t1.max(b.t1),
        lo: [
            a.lo[0].min(b.lo[0]),
            a.lo[1].min(b.lo[1]),
            a.lo[2].min(b.lo[2]),
        ],
        hi: [
            a.hi[0].max(b.hi[0]),
            a.hi[1].max(b.hi[1]),
            a.hi[2].max(b.hi[2]),
        ],
    }
}

fn adjacent(a: &WaveIndex, b: &WaveIndex) -> bool {
    (0..4).all(|i| (a.k[i] - b.k[i]).abs() <= 1)
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Complex amplitude pair at a node, zero off the patch boxes.
#[inline]
fn cget(p: &CPatch<3>, it: usize, ix: usize, iy: usize, iz: usize) -> C3 {
    let (re, im) = p.get(it, ix, iy, iz);
    (re, im)
}

fn build_slab(
    ctx: &StageCtx,
    k0: i64,
    acc: &mut Acc,
    diag: &mut DiagAcc,
) -> Result<Option<SlabWaves>, IterationError> {
    let g = &ctx.g;
    let sl = g.slice_len();
    let back = ctx
        .cutoffs
        .back_map(k0)
        .expect("listed birth index")
        .clone();
    let (lo, hi) = back.window();

    let mut cells: std::collections::BTreeSet<[i64; 3]> = std::collections::BTreeSet::new();
    for it in lo..=hi {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            if !ctx.env_mask.get(it, ix, iy, iz) {
                continue;
            }
            for c in ctx.cutoffs.active_cells(k0, it, ix, iy, iz) {
                cells.insert(c);
            }
        }
    }
    if cells.is_empty() {
        return Ok(None);
    }
    let classes: std::collections::BTreeSet<usize> = cells
        .iter()
        .map(|c| DodecahedralFrame::rotation_class(&[k0, c[0], c[1], c[2]]))
        .collect();

    let mut waves: Vec<StageWave> = Vec::new();
    let mut groups: Vec<GroupPhase> = Vec::new();
    let lambda = ctx.params.lambda;
    let full_box = PatchBox {
        t0: lo,
        t1: hi,
        lo: [0; 3],
        hi: [g.n[0] - 1, g.n[1] - 1, g.n[2] - 1],
    };

    for class in classes {
        let phases: Vec<PhaseFunction> = (0..12)
            .map(|f| {
                let dir = ctx.frame.direction_class(class, f);
                PhaseFunction::from_back_map(&back, dir, [0.0; 3], ctx.cfg.wave.c0)
            })
            .collect::<Result<_, WaveError>>()?;
        let gamma = solve_gamma(ctx.eps, &phases, Some(ctx.env_mask), &ctx.cfg.wave)?;
        diag.max_gamma_residual = diag.max_gamma_residual.max(gamma.max_residual);

        let group_base = groups.len();
        for ph in &phases {
            groups.push(GroupPhase {
                xi: RPatch::<1>::from_scalar(&ph.xi, full_box),
                grad: RPatch::<3>::from_vector(&ph.grad, full_box),
            });
        }

        for cell in cells
            .iter()
            .filter(|c| DodecahedralFrame::rotation_class(&[k0, c[0], c[1], c[2]]) == class)
        {
            for face in 0..12 {
                let idx = WaveIndex {
                    k: [k0, cell[0], cell[1], cell[2]],
                    face,
                };
                let amp = build_amplitude(
                    idx,
                    &phases[face],
                    &phases[companion_face(face)],
                    ctx.cutoffs,
                    ctx.e_sqrt_reg,
                    &gamma.gamma[face / 2],
                    lambda,
                    &ctx.cfg.wave,
                )?;
                let wave = assemble_wave(&amp)?;
                diag.max_div_ratio = diag.max_div_ratio.max(wave.div_ratio);
                diag.max_drift = diag.max_drift.max(phases[face].drift);
                diag.min_single_grad = diag.min_single_grad.min(amp.min_grad);

                acc.correction_re.axpy(1.0, &wave.v.re);
                acc.correction_im.axpy(1.0, &wave.v.im);

                let Some(bx_ab) = support_bbox(g, &[&amp.a, &amp.b], amp.window) else {
                    continue;
                };
                let bx_dv =
                    support_bbox(g, &[&amp.dv.re, &amp.dv.im], amp.window).unwrap_or(bx_ab);
                let bx_w = box_union(&bx_ab, &bx_dv);

                // Low-frequency quadratic stress and corrector cross terms
                // (conjugate phases cancel, so these carry no oscillation).
                for it in bx_w.t0..=bx_w.t1 {
                    for iz in bx_w.lo[2]..=bx_w.hi[2] {
                        for iy in bx_w.lo[1]..=bx_w.hi[1] {
                            for ix in bx_w.lo[0]..=bx_w.hi[0] {
                                let a = amp.a.at(it, ix, iy, iz);
                                let b = amp.b.at(it, ix, iy, iz);
                                let dre = amp.dv.re.at(it, ix, iy, iz);
                                let dim = amp.dv.im.at(it, ix, iy, iz);
                                if a == [0.0; 3]
                                    && b == [0.0; 3]
                                    && dre == [0.0; 3]
                                    && dim == [0.0; 3]
                                {
                                    continue;
                                }
                                let mut q = acc.quad.at6(it, ix, iy, iz);
                                let mut s = acc.q_s.at6(it, ix, iy, iz);
                                for (c, &(j, l)) in PAIR6.iter().enumerate() {
                                    q[c] += a[j] * a[l] + b[j] * b[l];
                                    s[c] += dre[j] * a[l]
                                        + a[j] * dre[l]
                                        + dim[j] * b[l]
                                        + b[j] * dim[l]
                                        + dre[j] * dre[l]
                                        + dim[j] * dim[l];
                                }
                                acc.quad.set6(it, ix, iy, iz, q);
                                acc.q_s.set6(it, ix, iy, iz, s);
                            }
                        }
                    }
                }

                // Transport force (D_t + v_ε·∇)ṽ + ṽ·∇v_ε on the full grid
                // while the amplitude is materialized, then absorbed from a
                // sparse patch with the shared group phase.
                let gidx = group_base + face;
                let (_tb, xb) = idx.birth(ctx.params.tau, ctx.params.rho);
                let d = phases[face].dir;
                let offset = -(d[0] * xb[0] + d[1] * xb[1] + d[2] * xb[2]);

                let mut vt_re = amp.a.clone();
                vt_re.axpy(1.0, &amp.dv.re);
                let mut vt_im = amp.b.clone();
                vt_im.axpy(1.0, &amp.dv.im);
                let mut ut_re = advective_derivative_vector(&vt_re, ctx.v_eps)?;
                let mut ut_im = advective_derivative_vector(&vt_im, ctx.v_eps)?;
                for it in bx_w.t0..=bx_w.t1 {
                    for iz in bx_w.lo[2]..=bx_w.hi[2] {
                        for iy in bx_w.lo[1]..=bx_w.hi[1] {
                            for ix in bx_w.lo[0]..=bx_w.hi[0] {
                                let wr = vt_re.at(it, ix, iy, iz);
                                let wi = vt_im.at(it, ix, iy, iz);
                                if wr == [0.0; 3] && wi == [0.0; 3] {
                                    continue;
                                }
                                let mut ur = ut_re.at(it, ix, iy, iz);
                                let mut ui = ut_im.at(it, ix, iy, iz);
                                for a in 0..3 {
                                    let dv = ctx.dve[a].at(it, ix, iy, iz);
                                    for c in 0..3 {
                                        ur[c] += wr[a] * dv[c];
                                        ui[c] += wi[a] * dv[c];
                                    }
                                }
                                ut_re.set(it, ix, iy, iz, ur);
                                ut_im.set(it, ix, iy, iz, ui);
                            }
                        }
                    }
                }
                let margin = 2 + 2 * ctx.cfg.depth + 2;
                let mut bx_f = bx_w.grown(margin, g);
                bx_f.t0 = bx_w.t0.saturating_sub(1).max(amp.window.0);
                bx_f.t1 = (bx_w.t1 + 1).min(amp.window.1);
                // Force escaping the phase window cannot be absorbed there;
                // measure what is discarded.
                for it in [bx_f.t0.checked_sub(1), Some(bx_f.t1 + 1)]
                    .into_iter()
                    .flatten()
                {
                    if it >= g.nt || (it >= bx_f.t0 && it <= bx_f.t1) {
                        continue;
                    }
                    for iz in bx_f.lo[2]..=bx_f.hi[2] {
                        for iy in bx_f.lo[1]..=bx_f.hi[1] {
                            for ix in bx_f.lo[0]..=bx_f.hi[0] {
                                let n = norm3(ut_re.at(it, ix, iy, iz))
                                    .max(norm3(ut_im.at(it, ix, iy, iz)));
                                diag.q_t_clip_sup = diag.q_t_clip_sup.max(n);
                            }
                        }
                    }
                }
                let u_t = CPatch::<3>::from_fields(&ut_re, &ut_im, bx_f);
                let force_sup = u_t.sup_norm();
                if force_sup > 0.0 {
                    let force = OscillatoryForce {
                        xi: &groups[gidx].xi,
                        grad: &groups[gidx].grad,
                        u: u_t,
                        lambda,
                        offset,
                        floor: 1.0 / ctx.cfg.wave.a_floor,
                        h: ctx.h,
                    };
                    let exp = parametrix_expand(&force, ctx.cfg.depth)?;
                    diag.note_expansion(exp.truncated, exp.remainder_sup, force_sup);
                    exp.add_solution(&groups[gidx].xi, &mut acc.q_t_re, &mut acc.q_t_im);
                    let bucket = acc
                        .buckets
                        .entry(k0)
                        .or_insert_with(|| ComplexVectorField::zeros(g));
                    exp.add_remainder(&groups[gidx].xi, bucket);
                }

                waves.push(StageWave {
                    idx,
                    group: gidx,
                    offset,
                    bx: bx_w,
                    v: CPatch::<3>::from_fields(&amp.a, &amp.b, bx_ab),
                    dv: CPatch::<3>::from_fields(&amp.dv.re, &amp.dv.im, bx_dv),
                });
                diag.wave_count += 1;
            }
        }
    }
    Ok(Some(SlabWaves { k0, waves, groups }))
}

/// Absorb the interaction forces of one unordered wave pair.
///
/// `weight` is 1 for distinct waves (both orders summed) and 1/2 for the
/// self pair, whose single ordered term is half the symmetrized sum.
#[allow(clippy::too_many_arguments)]
fn process_pair(
    ctx: &StageCtx,
    wi: &StageWave,
    gi: &GroupPhase,
    wj: &StageWave,
    gj: &GroupPhase,
    weight: f64,
    acc: &mut Acc,
    diag: &mut DiagAcc,
) -> Result<(), IterationError> {
    let Some(overlap) = wi.bx.intersect(&wj.bx) else {
        return Ok(());
    };
    let g = &ctx.g;
    let lambda = ctx.params.lambda;
    let self_pair = wi.idx == wj.idx;
    let bc = overlap.grown(2 * ctx.cfg.pair_depth + 2, g);

    // Slow curl of ṽ on the overlap (patches hold true values, zero
    // extension beyond their boxes is exact).
    let cb = overlap.grown(2, g);
    let mut vt_i = CPatch::<3>::zeros(cb);
    let mut vt_j = CPatch::<3>::zeros(cb);
    for it in cb.t0..=cb.t1 {
        for iz in cb.lo[2]..=cb.hi[2] {
            for iy in cb.lo[1]..=cb.hi[1] {
                for ix in cb.lo[0]..=cb.hi[0] {
                    let a = cadd(cget(&wi.v, it, ix, iy, iz), cget(&wi.dv, it, ix, iy, iz));
                    vt_i.set(it, ix, iy, iz, a.0, a.1);
                    if !self_pair {
                        let b = cadd(cget(&wj.v, it, ix, iy, iz), cget(&wj.dv, it, ix, iy, iz));
                        vt_j.set(it, ix, iy, iz, b.0, b.1);
                    }
                }
            }
        }
    }
    let curl_i = curl_patch(&vt_i, ctx.h);
    let curl_j = if self_pair {
        curl_i.clone()
    } else {
        curl_patch(&vt_j, ctx.h)
    };

    // Combined phase of the pair on the compute box.
    let mut xi_p = RPatch::<1>::zeros(bc);
    let mut grad_p = RPatch::<3>::zeros(bc);
    for it in bc.t0..=bc.t1 {
        for iz in bc.lo[2]..=bc.hi[2] {
            for iy in bc.lo[1]..=bc.hi[1] {
                for ix in bc.lo[0]..=bc.hi[0] {
                    let x = gi.xi.get(it, ix, iy, iz)[0] + gj.xi.get(it, ix, iy, iz)[0];
                    xi_p.set(it, ix, iy, iz, [x]);
                    let a = gi.grad.get(it, ix, iy, iz);
                    let b = gj.grad.get(it, ix, iy, iz);
                    grad_p.set(it, ix, iy, iz, [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
                }
            }
        }
    }

    let offset = wi.offset + wj.offset;
    let mut u_h = CPatch::<3>::zeros(bc);
    let mut u_hp = CPatch::<3>::zeros(bc);
    let mut any = false;
    for it in overlap.t0..=overlap.t1 {
        for iz in overlap.lo[2]..=overlap.hi[2] {
            for iy in overlap.lo[1]..=overlap.hi[1] {
                for ix in overlap.lo[0]..=overlap.hi[0] {
                    let vi = cget(&wi.v, it, ix, iy, iz);
                    let di = cget(&wi.dv, it, ix, iy, iz);
                    let vj = if self_pair {
                        vi
                    } else {
                        cget(&wj.v, it, ix, iy, iz)
                    };
                    let dj = if self_pair {
                        di
                    } else {
                        cget(&wj.dv, it, ix, iy, iz)
                    };
                    let zi = vi.0 == [0.0; 3] && vi.1 == [0.0; 3] && di.0 == [0.0; 3] && di.1 == [0.0; 3];
                    let zj = vj.0 == [0.0; 3] && vj.1 == [0.0; 3] && dj.0 == [0.0; 3] && dj.1 == [0.0; 3];
                    if zi || zj {
                        continue;
                    }
                    any = true;
                    let ti = cadd(vi, di);
                    let tj = cadd(vj, dj);
                    let ga = gi.grad.get(it, ix, iy, iz);
                    let gb = gj.grad.get(it, ix, iy, iz);
                    let gan = norm3(ga);
                    let gbn = norm3(gb);
                    diag.min_pair_grad = diag
                        .min_pair_grad
                        .min(norm3([ga[0] + gb[0], ga[1] + gb[1], ga[2] + gb[2]]));

                    let bh = cadd(
                        beltrami_defect_summand(vi, vj, gbn),
                        beltrami_defect_summand(vj, vi, gan),
                    );
                    let bh = cscale(-0.5 * lambda * weight, bh);
                    u_h.set(it, ix, iy, iz, bh.0, bh.1);

                    let ci = cget(&curl_i, it, ix, iy, iz);
                    let cj = cget(&curl_j, it, ix, iy, iz);
                    let g12 = cadd(
                        cadd(
                            corrector_rotation_summand(di, gb, tj),
                            corrector_rotation_summand(dj, ga, ti),
                        ),
                        cadd(
                            principal_corrector_summand(vi, gb, dj),
                            principal_corrector_summand(vj, ga, di),
                        ),
                    );
                    let g3 = cadd(slow_curl_summand(ti, cj), slow_curl_summand(tj, ci));
                    let hp = cadd(
                        cscale(-0.5 * lambda * weight, g12),
                        cscale(-0.5 * weight, g3),
                    );
                    u_hp.set(it, ix, iy, iz, hp.0, hp.1);

                    // Pair pressure `−w (ṽ_I·ṽ_J) e^{iλ(ξ_I+ξ_J)}`.
                    let (pre, pim) = cdot(ti, tj);
                    let ph = lambda * (xi_p.get(it, ix, iy, iz)[0] + offset);
                    let (sn, cs) = ph.sin_cos();
                    let pr = -weight * pre;
                    let pi = -weight * pim;
                    let cur = acc.pressure_re.at(it, ix, iy, iz);
                    acc.pressure_re
                        .set(it, ix, iy, iz, cur + cs * pr - sn * pi);
                    let cur = acc.pressure_im.at(it, ix, iy, iz);
                    acc.pressure_im
                        .set(it, ix, iy, iz, cur + sn * pr + cs * pi);
                }
            }
        }
    }
    if !any {
        return Ok(());
    }
    diag.pair_count += 1;
    if self_pair {
        diag.self_pair_count += 1;
    }
    let kmin = wi.idx.k[0].min(wj.idx.k[0]);
    // The pair gradient has no a-priori floor across rotation classes; the
    // expansion truncates itself at its smallest term instead.
    let floor = 1e-6;

    for (u, acc_re, acc_im) in [
        (u_h, &mut acc.q_h_re, &mut acc.q_h_im),
        (u_hp, &mut acc.q_hp_re, &mut acc.q_hp_im),
    ] {
        let force_sup = u.sup_norm();
        if force_sup == 0.0 {
            continue;
        }
        let force = OscillatoryForce {
            xi: &xi_p,
            grad: &grad_p,
            u,
            lambda,
            offset,
            floor,
            h: ctx.h,
        };
        let exp = parametrix_expand(&force, ctx.cfg.pair_depth)?;
        diag.note_expansion(exp.truncated, exp.remainder_sup, force_sup);
        exp.add_solution(&xi_p, acc_re, acc_im);
        let bucket = acc
            .buckets
            .entry(kmin)
            .or_insert_with(|| ComplexVectorField::zeros(g));
        exp.add_remainder(&xi_p, bucket);
    }
    Ok(())
}

pub fn run_stage(input: &StageInput) -> Result<StageOutput, IterationError> {
    let state = input.state;
    let g = state.grid().clone();
    if !Arc::ptr_eq(&g, input.e_sqrt.grid()) {
        return Err(IterationError::Levels("energy grid mismatch".into()));
    }
    let cfg = &input.config;
    state
        .levels
        .validate()
        .map_err(|e| IterationError::Levels(e.to_string()))?;
    let params = choose_parameters(&state.levels, input.n, cfg)?;

    let dx_max = g.dx(0).max(g.dx(1)).max(g.dx(2));
    let guard = PI / (3.0 * dx_max);
    if params.lambda > guard {
        return Err(IterationError::UnderResolved {
            lambda: params.lambda,
            max: guard,
        });
    }
    let h = [g.dx(0), g.dx(1), g.dx(2)];
    let sl = g.slice_len();

    // Absorb the stress trace into the pressure; everything downstream
    // works with the trace-free part.
    let tr = state.r.trace();
    let mut r0 = state.r.clone();
    for c in [0usize, 3, 5] {
        let mut comp = r0.component(c);
        comp.axpy(-1.0 / 3.0, &tr);
        r0.set_component(c, &comp);
    }
    let previous_sup = r0.sup_norm();

    // Mollification: velocity in space, stress and energy along the
    // coarse flow.
    let kernel_v = MollKernel::lattice_space(&g, params.eps_v, cfg.moll_order, false)?;
    let v_eps = mollify_space_vector(&state.v, &kernel_v)?;
    let flow = FlowMap::new(v_eps.clone(), g.dt() / 4.0);
    let moll = FlowMollifier::new(&flow, params.eps_t, params.eps_x, cfg.moll_order, false)?;
    let r_eps = regularize_stress(&r0, &moll)?;
    let moll_pos = FlowMollifier::new(&flow, params.eps_t, params.eps_x, 0, true)?;
    let e_sqrt_reg = regularize_energy(input.e_sqrt, &moll_pos)?;

    // Energy floor over the advected neighbourhood of the stress support.
    let r_eps_sup = r_eps.sup_norm();
    let needed = cfg.k_lower * cfg.k_lower * params.e_r;
    let mut energy_margin = f64::INFINITY;
    if r_eps_sup > 0.0 {
        let mut seeds = SpaceTimeMask::empty(&g);
        let thr = 1e-12 * r_eps_sup;
        for it in 0..g.nt {
            for s in 0..sl {
                let (ix, iy, iz) = g.spatial_coords(s);
                let r = r_eps.at6(it, ix, iy, iz);
                if r.iter().any(|v| v.abs() > thr) {
                    seeds.set(it, ix, iy, iz, true);
                }
            }
        }
        let mask = eulerian_cylinder_mask(&flow, params.theta, 1.0 / params.xi, &seeds);
        for it in 0..g.nt {
            for s in 0..sl {
                let (ix, iy, iz) = g.spatial_coords(s);
                if !mask.get(it, ix, iy, iz) {
                    continue;
                }
                let es = e_sqrt_reg.at(it, ix, iy, iz);
                let e = es * es;
                if e < needed {
                    return Err(IterationError::EnergyLowerBound {
                        value: e,
                        needed,
                        it,
                    });
                }
                energy_margin = energy_margin.min(e - needed);
            }
        }
    }
    if !energy_margin.is_finite() {
        energy_margin = 0.0;
    }

    // Prescribed deviation from isotropy and the envelope mask.
    let mut eps_t = SymmetricTensorField::zeros(&g);
    let mut env_mask = SpaceTimeMask::empty(&g);
    let mut eps_sup: f64 = 0.0;
    let mut e_sup: f64 = 0.0;
    for it in 0..g.nt {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let es = e_sqrt_reg.at(it, ix, iy, iz);
            if es <= 0.0 {
                continue;
            }
            env_mask.set(it, ix, iy, iz, true);
            let e = es * es;
            e_sup = e_sup.max(e);
            let r = r_eps.at6(it, ix, iy, iz);
            let tr3 = (r[0] + r[3] + r[5]) / 3.0;
            let mut v = [0.0; 6];
            for (c, rv) in r.iter().enumerate() {
                let dev = rv - if c == 0 || c == 3 || c == 5 { tr3 } else { 0.0 };
                v[c] = -dev / e;
                eps_sup = eps_sup.max(v[c].abs());
            }
            eps_t.set6(it, ix, iy, iz, v);
        }
    }
    if eps_sup > cfg.wave.eps_radius {
        return Err(WaveError::EpsTooLarge {
            value: eps_sup,
            radius: cfg.wave.eps_radius,
        }
        .into());
    }

    let cutoffs = build_cutoffs(&flow, params.tau, params.rho)?;
    let frame = init_frame()?;
    let dve: [VectorField; 3] = [0, 1, 2].map(|a| {
        VectorField::from_components(
            &deriv_axis(&v_eps.component(0), a),
            &deriv_axis(&v_eps.component(1), a),
            &deriv_axis(&v_eps.component(2), a),
        )
    });

    let ctx = StageCtx {
        g: g.clone(),
        h,
        cfg,
        params: &params,
        frame: &frame,
        cutoffs: &cutoffs,
        env_mask: &env_mask,
        eps: &eps_t,
        e_sqrt_reg: &e_sqrt_reg,
        v_eps: &v_eps,
        dve: &dve,
    };
    let mut acc = Acc::new(&g);
    let mut diag = DiagAcc::new();
    let mut slab_count = 0usize;

    let mut prev: Option<SlabWaves> = None;
    for k0 in cutoffs.birth_indices() {
        let cur = build_slab(&ctx, k0, &mut acc, &mut diag)?;
        let Some(cur) = cur else {
            prev = None;
            continue;
        };
        slab_count += 1;
        for i in 0..cur.waves.len() {
            for j in i..cur.waves.len() {
                let (wi, wj) = (&cur.waves[i], &cur.waves[j]);
                if i != j {
                    if !adjacent(&wi.idx, &wj.idx) {
                        continue;
                    }
                    if wi.idx.k == wj.idx.k && wj.idx.face == conjugate_face(wi.idx.face) {
                        continue;
                    }
                }
                let weight = if i == j { 0.5 } else { 1.0 };
                process_pair(
                    &ctx,
                    wi,
                    &cur.groups[wi.group],
                    wj,
                    &cur.groups[wj.group],
                    weight,
                    &mut acc,
                    &mut diag,
                )?;
            }
        }
        if let Some(p) = &prev {
            if cur.k0 == p.k0 + 1 {
                for wi in &p.waves {
                    for wj in &cur.waves {
                        if !adjacent(&wi.idx, &wj.idx) {
                            continue;
                        }
                        process_pair(
                            &ctx,
                            wi,
                            &p.groups[wi.group],
                            wj,
                            &cur.groups[wj.group],
                            1.0,
                            &mut acc,
                            &mut diag,
                        )?;
                    }
                }
            }
        }
        prev = Some(cur);
    }
    drop(prev);

    // Close each slab's unabsorbed remainder with one compact divergence
    // solve, centered on the bucket's own support.
    let mut q_o = SymmetricTensorField::zeros(&g);
    let mut bucket_residuals: Vec<f64> = Vec::new();
    let mut imag_bucket_sups: Vec<f64> = Vec::new();
    let opts = SymDivOptions {
        gl_nodes: cfg.gl_nodes,
        moment_tol_factor: cfg.moment_tol_factor,
    };
    for (k0, bucket) in &acc.buckets {
        imag_bucket_sups.push(bucket.im.sup_norm());
        let force = bucket.re.clone();
        let sup = force.sup_norm();
        if sup <= 0.0 {
            bucket_residuals.push(0.0);
            continue;
        }
        let thr = 1e-14 * sup;
        let mut centroid = [0.0f64; 3];
        let mut count = 0usize;
        let mut t_lo = f64::INFINITY;
        let mut t_hi = f64::NEG_INFINITY;
        for it in 0..g.nt {
            for s in 0..sl {
                let (ix, iy, iz) = g.spatial_coords(s);
                if norm3(force.at(it, ix, iy, iz)) <= thr {
                    continue;
                }
                let x = [g.x(0, ix), g.x(1, iy), g.x(2, iz)];
                for a in 0..3 {
                    centroid[a] += x[a];
                }
                count += 1;
                t_lo = t_lo.min(g.t(it));
                t_hi = t_hi.max(g.t(it));
            }
        }
        for a in 0..3 {
            centroid[a] /= count as f64;
        }
        let mut radius: f64 = 0.0;
        for it in 0..g.nt {
            for s in 0..sl {
                let (ix, iy, iz) = g.spatial_coords(s);
                if norm3(force.at(it, ix, iy, iz)) <= thr {
                    continue;
                }
                let x = [g.x(0, ix), g.x(1, iy), g.x(2, iz)];
                radius = radius.max(norm3([
                    x[0] - centroid[0],
                    x[1] - centroid[1],
                    x[2] - centroid[2],
                ]));
            }
        }
        let t_c = (*k0 as f64 * params.tau).clamp(g.t0, g.t1);
        let tau_z = (t_hi - t_c).abs().max((t_lo - t_c).abs()) + g.dt();
        let rho_z = (radius * cfg.rho_bar_factor + 2.0 * dx_max).max(2.01 * dx_max);
        let zeta = build_zeta(&flow, t_c, centroid, tau_z.max(g.dt()), rho_z)?;
        let sol = symdiv_solve(&force, &zeta, &opts)?;
        bucket_residuals.push(sol.residual_rel_l2);
        q_o.axpy(1.0, &sol.r);
    }

    // Assemble the ledger.
    let q_m = compute_q_m(&state.v, &v_eps, &acc.correction_re, &r0, &r_eps);
    let mut q_s = acc.q_s;
    let mut stress_residual_p0: f64 = 0.0;
    for it in 0..g.nt {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let es = e_sqrt_reg.at(it, ix, iy, iz);
            let e = es * es;
            let r = r_eps.at6(it, ix, iy, iz);
            let q = acc.quad.at6(it, ix, iy, iz);
            let mut sv = q_s.at6(it, ix, iy, iz);
            let mut nonzero = false;
            for c in 0..6 {
                let diag_c = if c == 0 || c == 3 || c == 5 { 1.0 } else { 0.0 };
                let defect = q[c] - e / 3.0 * diag_c + r[c];
                if env_mask.get(it, ix, iy, iz) {
                    stress_residual_p0 = stress_residual_p0.max(defect.abs());
                }
                sv[c] += defect;
                nonzero = nonzero || sv[c] != 0.0;
            }
            if nonzero {
                q_s.set6(it, ix, iy, iz, sv);
            }
        }
    }

    let mut r1 = q_m.clone();
    r1.axpy(1.0, &q_s);
    r1.axpy(1.0, &acc.q_t_re);
    r1.axpy(1.0, &acc.q_h_re);
    r1.axpy(1.0, &acc.q_hp_re);
    r1.axpy(1.0, &q_o);

    // New pressure: trace absorption, the isotropic third of the added
    // energy and the low-frequency pair pressure.
    let mut pressure_correction = acc.pressure_re;
    for it in 0..g.nt {
        for s in 0..sl {
            let (ix, iy, iz) = g.spatial_coords(s);
            let es = e_sqrt_reg.at(it, ix, iy, iz);
            let cur = pressure_correction.at(it, ix, iy, iz);
            let t3 = tr.at(it, ix, iy, iz) / 3.0;
            pressure_correction.set(it, ix, iy, iz, cur - es * es / 3.0 - t3);
        }
    }
    let mut p1 = state.p.clone();
    p1.axpy(1.0, &pressure_correction);
    let mut v1 = state.v.clone();
    v1.axpy(1.0, &acc.correction_re);

    let mut momentum_linear_max: f64 = 0.0;
    let mut momentum_angular_max: f64 = 0.0;
    for it in 0..g.nt {
        let (lin, ang) = momentum_functionals(&acc.correction_re, it)?;
        momentum_linear_max = momentum_linear_max.max(norm3(lin));
        momentum_angular_max = momentum_angular_max.max(norm3(ang));
    }

    let norms = LedgerNorms {
        q_m: q_m.sup_norm(),
        q_s: q_s.sup_norm(),
        q_t: acc.q_t_re.sup_norm(),
        q_h: acc.q_h_re.sup_norm(),
        q_hp: acc.q_hp_re.sup_norm(),
        q_o: q_o.sup_norm(),
        total: r1.sup_norm(),
        previous: previous_sup,
    };
    let imag_stress_sup = acc
        .q_t_im
        .sup_norm()
        .max(acc.q_h_im.sup_norm())
        .max(acc.q_hp_im.sup_norm());

    let diagnostics = StageDiagnostics {
        wave_count: diag.wave_count,
        pair_count: diag.pair_count,
        self_pair_count: diag.self_pair_count,
        slab_count,
        max_drift: diag.max_drift,
        max_gamma_residual: diag.max_gamma_residual,
        max_div_ratio: diag.max_div_ratio,
        min_single_grad: diag.min_single_grad,
        min_pair_grad: diag.min_pair_grad,
        imag_correction_sup: acc.correction_im.sup_norm(),
        imag_stress_sup,
        imag_pressure_sup: acc.pressure_im.sup_norm(),
        stress_residual_p0,
        stress_scale: e_sup,
        imag_bucket_sups,
        bucket_residuals,
        truncated_expansions: diag.truncated,
        expansion_count: diag.expansions,
        max_remainder_ratio: diag.max_remainder_ratio,
        q_t_clip_sup: diag.q_t_clip_sup,
        momentum_linear_max,
        momentum_angular_max,
        energy_margin,
        correction_sup: acc.correction_re.sup_norm(),
    };

    let levels = FrequencyEnergyLevels {
        xi: params.xi_next,
        e_v: params.e_v_next,
        e_r: params.e_r_next,
        order: state.levels.order,
    };
    let ledger = StressLedger {
        q_m,
        q_s,
        q_t: acc.q_t_re,
        q_h: acc.q_h_re,
        q_hp: acc.q_hp_re,
        q_o,
        norms,
    };
    Ok(StageOutput {
        state: EulerReynoldsState {
            v: v1,
            p: p1,
            r: r1.clone(),
            levels,
        },
        params,
        correction: acc.correction_re,
        pressure_correction,
        ledger,
        diagnostics,
    })
}
