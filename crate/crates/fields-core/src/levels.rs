use crate::deriv::{
    advective_derivative_tensor, deriv_axis, gradient, sym_div, time_derivative,
};
use crate::field::{ScalarField, VectorField};
use crate::{EulerReynoldsState, FieldError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Declared frequency-energy levels `(Xi, e_v, e_R)` to derivative order
/// `order`: `|grad^k v| <= Xi^k e_v^{1/2}` (k=1..order), `|grad^k p| <= Xi^k
/// e_v` (k=1..order), `|grad^k R| <= Xi^k e_R` (k=0..order), and
/// `|grad^k (d_t + v.grad) R| <= Xi^{k+1} e_v^{1/2} e_R` (k=0..order-1).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrequencyEnergyLevels {
    pub xi: f64,
    pub e_v: f64,
    pub e_r: f64,
    pub order: usize,
}

impl FrequencyEnergyLevels {
    pub fn validate(&self) -> Result<(), FieldError> {
        if self.xi < 2.0 {
            return Err(FieldError::Invalid(format!("Xi = {} < 2", self.xi)));
        }
        if self.e_r > self.e_v {
            return Err(FieldError::Invalid(format!(
                "e_R = {} exceeds e_v = {}",
                self.e_r, self.e_v
            )));
        }
        Ok(())
    }
}

/// Geometric norm lattice with ratio 2^{1/4}; `snap_up` returns the smallest
/// lattice value >= x (with a floor so zero fields land on the bottom cell).
pub const LATTICE_RATIO: f64 = 1.189_207_115_002_721;
pub const LATTICE_FLOOR: f64 = 1e-8;

pub fn snap_up(x: f64) -> f64 {
    let x = x.max(LATTICE_FLOOR);
    let j = (x.ln() / LATTICE_RATIO.ln()).ceil();
    // Guard against x already being a lattice point shifted up by roundoff.
    let v = LATTICE_RATIO.powf(j);
    if v / x > LATTICE_RATIO * (1.0 - 1e-12) {
        LATTICE_RATIO.powf(j - 1.0)
    } else {
        v
    }
}

/// Sup norms of all spatial multi-index derivatives of `f`, orders 0..=kmax.
/// `norms[k]` = max over multi-indices of order k of the discrete sup norm.
pub fn derivative_sup_norms(f: &ScalarField, kmax: usize) -> Vec<f64> {
    let mut norms = vec![f.sup_norm()];
    let mut level = vec![f.clone()];
    for _ in 1..=kmax {
        let mut next = Vec::with_capacity(level.len() * 3);
        for g in &level {
            for axis in 0..3 {
                next.push(deriv_axis(g, axis));
            }
        }
        norms.push(
            next.par_iter()
                .map(|g| g.sup_norm())
                .reduce(|| 0.0, f64::max),
        );
        level = next;
    }
    norms
}

fn max_norms(fields: &[ScalarField], kmax: usize) -> Vec<f64> {
    let per: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| derivative_sup_norms(f, kmax))
        .collect();
    (0..=kmax)
        .map(|k| per.iter().map(|n| n[k]).fold(0.0, f64::max))
        .collect()
}

struct MeasuredNorms {
    v: Vec<f64>,     // orders 0..=L, order 0 unused
    p: Vec<f64>,     // orders 0..=L
    r: Vec<f64>,     // orders 0..=L
    dt_r: Vec<f64>,  // orders 0..=L-1
}

fn measure(s: &EulerReynoldsState, order: usize) -> Result<MeasuredNorms, FieldError> {
    s.v.validate()?;
    s.p.validate()?;
    s.r.validate()?;
    let vcomps: Vec<ScalarField> = (0..3).map(|c| s.v.component(c)).collect();
    let rcomps: Vec<ScalarField> = (0..6).map(|c| s.r.component(c)).collect();
    let dtr = advective_derivative_tensor(&s.r, &s.v)?;
    let dtrcomps: Vec<ScalarField> = (0..6).map(|c| dtr.component(c)).collect();
    Ok(MeasuredNorms {
        v: max_norms(&vcomps, order),
        p: derivative_sup_norms(&s.p, order),
        r: max_norms(&rcomps, order),
        dt_r: max_norms(&dtrcomps, order.saturating_sub(1)),
    })
}

/// Smallest levels on the geometric lattice under which the measured discrete
/// sup norms sit.
///
/// Well-posedness convention: the frequency is fixed first from derivative
/// ratios, `Xi = max over fields, k >= 2 of (|grad^k f| / |grad f|)^{1/(k-1)}`
/// (and `(|grad^k R|/|R|)^{1/k}`), snapped up on the lattice and clamped to
/// >= 2; the energy levels are then the smallest lattice values making every
/// bound hold at that frequency.  A pure sine `A sin(Xi0 x)` lands within one
/// lattice step of `(Xi0, A^2)`.
pub fn estimate_levels(
    s: &EulerReynoldsState,
    order: usize,
) -> Result<FrequencyEnergyLevels, FieldError> {
    let m = measure(s, order)?;
    let mut xi: f64 = 2.0;
    let ratio = |hi: f64, lo: f64, pow: f64| -> f64 {
        if lo > 1e-300 && hi > 0.0 {
            (hi / lo).powf(pow)
        } else {
            0.0
        }
    };
    for k in 2..=order {
        let pw = 1.0 / (k as f64 - 1.0);
        xi = xi.max(ratio(m.v[k], m.v[1], pw));
        xi = xi.max(ratio(m.p[k], m.p[1], pw));
    }
    for k in 1..=order {
        xi = xi.max(ratio(m.r[k], m.r[0], 1.0 / k as f64));
    }
    let xi = snap_up(xi).max(2.0);

    let mut ev_sqrt: f64 = 0.0;
    for k in 1..=order {
        ev_sqrt = ev_sqrt.max(m.v[k] / xi.powi(k as i32));
        ev_sqrt = ev_sqrt.max((m.p[k] / xi.powi(k as i32)).sqrt());
    }
    let ev_sqrt = snap_up(ev_sqrt);
    let e_v = ev_sqrt * ev_sqrt;

    let mut e_r: f64 = 0.0;
    for k in 0..=order {
        e_r = e_r.max(m.r[k] / xi.powi(k as i32));
    }
    for (k, n) in m.dt_r.iter().enumerate() {
        e_r = e_r.max(n / (xi.powi(k as i32 + 1) * ev_sqrt));
    }
    let mut e_r = snap_up(e_r).min(e_v);
    // e_R <= e_v is part of the definition; re-check feasibility at the cap.
    let feasible = (0..=order).all(|k| m.r[k] <= xi.powi(k as i32) * e_r * (1.0 + 1e-9))
        && m.dt_r
            .iter()
            .enumerate()
            .all(|(k, n)| *n <= xi.powi(k as i32 + 1) * ev_sqrt * e_r * (1.0 + 1e-9));
    if !feasible {
        e_r = e_v; // dominated by the cap; caller sees e_R = e_v saturated
    }
    Ok(FrequencyEnergyLevels {
        xi,
        e_v,
        e_r,
        order,
    })
}

/// Check whether a state's measured norms satisfy Definition-style bounds at
/// the given levels; returns the first violating (bound, order) on failure.
pub fn check_levels(
    s: &EulerReynoldsState,
    lv: &FrequencyEnergyLevels,
    slack: f64,
) -> Result<(), FieldError> {
    lv.validate()?;
    let m = measure(s, lv.order)?;
    let ev_sqrt = lv.e_v.sqrt();
    for k in 1..=lv.order {
        if m.v[k] > lv.xi.powi(k as i32) * ev_sqrt * slack {
            return Err(FieldError::Invalid(format!("grad^{k} v exceeds level")));
        }
        if m.p[k] > lv.xi.powi(k as i32) * lv.e_v * slack {
            return Err(FieldError::Invalid(format!("grad^{k} p exceeds level")));
        }
    }
    for k in 0..=lv.order {
        if m.r[k] > lv.xi.powi(k as i32) * lv.e_r * slack {
            return Err(FieldError::Invalid(format!("grad^{k} R exceeds level")));
        }
    }
    for (k, n) in m.dt_r.iter().enumerate() {
        if *n > lv.xi.powi(k as i32 + 1) * ev_sqrt * lv.e_r * slack {
            return Err(FieldError::Invalid(format!(
                "grad^{k} advective R exceeds level"
            )));
        }
    }
    Ok(())
}

/// `d_t v + div(v (x) v) + grad p - div R`, the defect of the state from the
/// Euler–Reynolds system.
pub fn euler_reynolds_residual(s: &EulerReynoldsState) -> Result<VectorField, FieldError> {
    let g = s.grid().clone();
    if g.nt < 3 {
        return Err(FieldError::TooFewSlices { need: 3, have: g.nt });
    }
    let div_r = sym_div(&s.r)?;
    let grad_p = gradient(&s.p);
    let mut comps = Vec::with_capacity(3);
    for l in 0..3 {
        let vl = s.v.component(l);
        let mut res = time_derivative(&vl)?;
        // div(v^j v^l) assembled from scalar products to stay conservative.
        for j in 0..3 {
            let vj = s.v.component(j);
            let mut prod = ScalarField::zeros(&g);
            prod.data_mut()
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, o)| *o = vj.data()[i] * vl.data()[i]);
            res.axpy(1.0, &deriv_axis(&prod, j));
        }
        res.axpy(1.0, &grad_p.component(l));
        res.axpy(-1.0, &div_r.component(l));
        comps.push(res);
    }
    Ok(VectorField::from_components(
        &comps[0], &comps[1], &comps[2],
    ))
}
