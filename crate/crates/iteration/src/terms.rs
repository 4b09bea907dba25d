//! Pointwise algebra for the stage error terms: the mollification error
//! tensor and the complex bracket summands that drive the oscillatory
//! pair forces.
//!
//! Complex 3-vectors are carried as `(re, im)` pairs of real triples.

use fields_core::{SymmetricTensorField, VectorField};

/// Complex 3-vector as (real, imaginary) triples.
pub type C3 = ([f64; 3], [f64; 3]);

pub const C3_ZERO: C3 = ([0.0; 3], [0.0; 3]);

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn cadd(a: C3, b: C3) -> C3 {
    (add3(a.0, b.0), add3(a.1, b.1))
}

#[inline]
pub fn cscale(s: f64, a: C3) -> C3 {
    (
        [s * a.0[0], s * a.0[1], s * a.0[2]],
        [s * a.1[0], s * a.1[1], s * a.1[2]],
    )
}

/// Complex cross product `a × b`.
#[inline]
pub fn ccross(a: C3, b: C3) -> C3 {
    (
        sub3(cross(a.0, b.0), cross(a.1, b.1)),
        add3(cross(a.0, b.1), cross(a.1, b.0)),
    )
}

/// `(i g) × w` for real `g` and complex `w`.
#[inline]
pub fn ig_cross(g: [f64; 3], w: C3) -> C3 {
    (
        [-cross(g, w.1)[0], -cross(g, w.1)[1], -cross(g, w.1)[2]],
        cross(g, w.0),
    )
}

/// Complex dot product `a · b` (bilinear, no conjugation).
#[inline]
pub fn cdot(a: C3, b: C3) -> (f64, f64) {
    let re = a.0[0] * b.0[0] + a.0[1] * b.0[1] + a.0[2] * b.0[2]
        - (a.1[0] * b.1[0] + a.1[1] * b.1[1] + a.1[2] * b.1[2]);
    let im = a.0[0] * b.1[0] + a.0[1] * b.1[1] + a.0[2] * b.1[2]
        + a.1[0] * b.0[0] + a.1[1] * b.0[1] + a.1[2] * b.0[2];
    (re, im)
}

/// Directed summand of the leading pair force: `v_I × ((|∇ξ_J| − 1) v_J)`.
/// The exact frame directions have unit phase gradients at birth; this
/// measures the drift away from that normalization.
#[inline]
pub fn beltrami_defect_summand(v_i: C3, v_j: C3, gj_norm: f64) -> C3 {
    ccross(v_i, cscale(gj_norm - 1.0, v_j))
}

/// Directed summand `δv_I × ((i ∇ξ_J) × ṽ_J)` (corrector against the
/// other wave's principal rotation).
#[inline]
pub fn corrector_rotation_summand(dv_i: C3, g_j: [f64; 3], vt_j: C3) -> C3 {
    ccross(dv_i, ig_cross(g_j, vt_j))
}

/// Directed summand `v_I × ((i ∇ξ_J) × δv_J)` (principal amplitude
/// against the other wave's corrector rotation).
#[inline]
pub fn principal_corrector_summand(v_i: C3, g_j: [f64; 3], dv_j: C3) -> C3 {
    ccross(v_i, ig_cross(g_j, dv_j))
}

/// Directed summand `ṽ_I × (∇ × ṽ_J)` where the curl acts on the slow
/// amplitude only (no frequency factor).
#[inline]
pub fn slow_curl_summand(vt_i: C3, curl_vt_j: C3) -> C3 {
    ccross(vt_i, curl_vt_j)
}

/// Mollification error: `(v − v_ε) ⊗ V + V ⊗ (v − v_ε) + (R − R_ε)`,
/// with `V` the (real) total velocity correction.
pub fn compute_q_m(
    v: &VectorField,
    v_eps: &VectorField,
    correction: &VectorField,
    r: &SymmetricTensorField,
    r_eps: &SymmetricTensorField,
) -> SymmetricTensorField {
    let grid = v.grid().clone();
    let mut out = SymmetricTensorField::zeros(&grid);
    const PAIR: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    for it in 0..grid.nt {
        for s in 0..grid.slice_len() {
            let (ix, iy, iz) = grid.spatial_coords(s);
            let w = sub3(v.at(it, ix, iy, iz), v_eps.at(it, ix, iy, iz));
            let vv = correction.at(it, ix, iy, iz);
            let dr = {
                let a = r.at6(it, ix, iy, iz);
                let b = r_eps.at6(it, ix, iy, iz);
                [
                    a[0] - b[0],
                    a[1] - b[1],
                    a[2] - b[2],
                    a[3] - b[3],
                    a[4] - b[4],
                    a[5] - b[5],
                ]
            };
            let mut q = [0.0; 6];
            for (c, &(j, l)) in PAIR.iter().enumerate() {
                q[c] = w[j] * vv[l] + w[l] * vv[j] + dr[c];
            }
            out.set6(it, ix, iy, iz, q);
        }
    }
    out
}
