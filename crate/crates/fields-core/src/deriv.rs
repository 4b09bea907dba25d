use crate::field::{ScalarField, SymmetricTensorField, VectorField, SYM_INDEX};
use crate::grid::Grid;
use crate::FieldError;
use rayon::prelude::*;

/// 4th-order central first derivative.  Periodic axes wrap; bounded axes use
/// zero extension (fields on bounded grids follow the compact-support
/// convention: the box is a window on R^3 and samples outside it are zero).
/// Central stencils everywhere keep discrete sums telescoping, so integrals
/// of derivatives of interior-supported fields vanish to roundoff — the
/// momentum identities downstream rely on this.
fn line_derivative(vals: &mut [f64], line: &[f64], h: f64, periodic: bool) {
    let n = line.len();
    let inv = 1.0 / (12.0 * h);
    if periodic {
        for i in 0..n {
            let m2 = line[(i + n - 2) % n];
            let m1 = line[(i + n - 1) % n];
            let p1 = line[(i + 1) % n];
            let p2 = line[(i + 2) % n];
            vals[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv;
        }
    } else {
        let get = |i: i64| -> f64 {
            if i < 0 || i >= n as i64 {
                0.0
            } else {
                line[i as usize]
            }
        };
        for i in 0..n as i64 {
            vals[i as usize] =
                (get(i - 2) - 8.0 * get(i - 1) + 8.0 * get(i + 1) - get(i + 2)) * inv;
        }
    }
}

/// Spatial partial derivative of a scalar field along `axis`.
pub fn deriv_axis(f: &ScalarField, axis: usize) -> ScalarField {
    let g = f.grid().clone();
    let mut out = ScalarField::zeros(&g);
    let n = g.n;
    let h = g.dx(axis);
    let periodic = g.periodic[axis];
    let data = f.data();

    // Collect per-line jobs: each line varies `axis`, others fixed.
    let (la, lb) = match axis {
        0 => (1usize, 2usize),
        1 => (0, 2),
        _ => (0, 1),
    };
    let stride = |g: &Grid, a: usize| -> usize {
        match a {
            0 => 1,
            1 => g.n[0],
            _ => g.n[0] * g.n[1],
        }
    };
    let s_axis = stride(&g, axis);
    let s_a = stride(&g, la);
    let s_b = stride(&g, lb);
    let slice = g.slice_len();

    let jobs: Vec<(usize, usize, usize)> = (0..g.nt)
        .flat_map(|it| {
            (0..n[lb]).flat_map(move |ib| (0..n[la]).map(move |ia| (it, ia, ib)))
        })
        .collect();
    let rows: Vec<(usize, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(it, ia, ib)| {
            let base = it * slice + ia * s_a + ib * s_b;
            let line: Vec<f64> = (0..n[axis]).map(|i| data[base + i * s_axis]).collect();
            let mut vals = vec![0.0; n[axis]];
            line_derivative(&mut vals, &line, h, periodic);
            (base, vals)
        })
        .collect();
    let out_data = out.data_mut();
    for (base, vals) in rows {
        for (i, v) in vals.into_iter().enumerate() {
            out_data[base + i * s_axis] = v;
        }
    }
    out
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField::from_components(&deriv_axis(f, 0), &deriv_axis(f, 1), &deriv_axis(f, 2))
}

/// `div v = d_j v^j`.
pub fn divergence(v: &VectorField) -> Result<ScalarField, FieldError> {
    v.validate()?;
    let mut out = deriv_axis(&v.component(0), 0);
    out.axpy(1.0, &deriv_axis(&v.component(1), 1));
    out.axpy(1.0, &deriv_axis(&v.component(2), 2));
    Ok(out)
}

/// `U^l = d_j R^{jl}` for a symmetric tensor.
pub fn sym_div(r: &SymmetricTensorField) -> Result<VectorField, FieldError> {
    r.validate()?;
    let mut comps = Vec::with_capacity(3);
    for l in 0..3 {
        let mut acc = ScalarField::zeros(r.grid());
        for j in 0..3 {
            acc.axpy(1.0, &deriv_axis(&r.component(SYM_INDEX[j][l]), j));
        }
        comps.push(acc);
    }
    Ok(VectorField::from_components(
        &comps[0], &comps[1], &comps[2],
    ))
}

pub fn curl(v: &VectorField) -> VectorField {
    let (vx, vy, vz) = (v.component(0), v.component(1), v.component(2));
    let mut cx = deriv_axis(&vz, 1);
    cx.axpy(-1.0, &deriv_axis(&vy, 2));
    let mut cy = deriv_axis(&vx, 2);
    cy.axpy(-1.0, &deriv_axis(&vz, 0));
    let mut cz = deriv_axis(&vy, 0);
    cz.axpy(-1.0, &deriv_axis(&vx, 1));
    VectorField::from_components(&cx, &cy, &cz)
}

/// 2nd-order time derivative on stored slices (one-sided at the ends).
pub fn time_derivative(f: &ScalarField) -> Result<ScalarField, FieldError> {
    let g = f.grid().clone();
    if g.nt < 3 {
        return Err(FieldError::TooFewSlices { need: 3, have: g.nt });
    }
    let mut out = ScalarField::zeros(&g);
    let slice = g.slice_len();
    let data = f.data();
    let dt = g.dt();
    let nt = g.nt;
    out.data_mut()
        .par_chunks_mut(slice)
        .enumerate()
        .for_each(|(it, chunk)| {
            for (s, o) in chunk.iter_mut().enumerate() {
                *o = if it == 0 {
                    (-3.0 * data[s] + 4.0 * data[slice + s] - data[2 * slice + s]) / (2.0 * dt)
                } else if it == nt - 1 {
                    (3.0 * data[it * slice + s] - 4.0 * data[(it - 1) * slice + s]
                        + data[(it - 2) * slice + s])
                        / (2.0 * dt)
                } else {
                    (data[(it + 1) * slice + s] - data[(it - 1) * slice + s]) / (2.0 * dt)
                };
            }
        });
    Ok(out)
}

/// `(d_t + v.grad) f` with the configured schemes.
pub fn advective_derivative_scalar(
    f: &ScalarField,
    v: &VectorField,
) -> Result<ScalarField, FieldError> {
    if f.grid().as_ref() != v.grid().as_ref() {
        return Err(FieldError::GridMismatch);
    }
    let mut out = time_derivative(f)?;
    let grad = gradient(f);
    let vd = v.data();
    let gd = grad.data();
    out.data_mut().par_iter_mut().enumerate().for_each(|(i, o)| {
        *o += vd[i * 3] * gd[i * 3] + vd[i * 3 + 1] * gd[i * 3 + 1] + vd[i * 3 + 2] * gd[i * 3 + 2];
    });
    Ok(out)
}

/// Advective derivative applied to each component of a vector field.
pub fn advective_derivative_vector(
    f: &VectorField,
    v: &VectorField,
) -> Result<VectorField, FieldError> {
    let c0 = advective_derivative_scalar(&f.component(0), v)?;
    let c1 = advective_derivative_scalar(&f.component(1), v)?;
    let c2 = advective_derivative_scalar(&f.component(2), v)?;
    Ok(VectorField::from_components(&c0, &c1, &c2))
}

/// Advective derivative applied to each stored component of a tensor.
pub fn advective_derivative_tensor(
    f: &SymmetricTensorField,
    v: &VectorField,
) -> Result<SymmetricTensorField, FieldError> {
    let mut out = SymmetricTensorField::zeros(f.grid());
    for c in 0..6 {
        out.set_component(c, &advective_derivative_scalar(&f.component(c), v)?);
    }
    Ok(out)
}
