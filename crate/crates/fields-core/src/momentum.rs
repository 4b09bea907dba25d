use crate::field::VectorField;
use crate::FieldError;

/// Linear and angular momentum functionals of one time slice:
/// `int U dx` and `int (x^k U^l - x^l U^k) dx` (components ordered
/// `(yz, zx, xy)`, i.e. the usual `int x ^ U`).
///
/// The angular part needs a genuine position weight and is rejected on
/// periodic grids.
pub fn momentum_functionals(
    u: &VectorField,
    it: usize,
) -> Result<([f64; 3], [f64; 3]), FieldError> {
    u.validate()?;
    let g = u.grid().clone();
    let mut linear = [0.0; 3];
    let mut angular = [0.0; 3];
    let any_periodic = g.periodic.iter().any(|p| *p);
    for s in 0..g.slice_len() {
        let w = g.quad_weight(s);
        let (ix, iy, iz) = g.spatial_coords(s);
        let x = [g.x(0, ix), g.x(1, iy), g.x(2, iz)];
        let v = u.at(it, ix, iy, iz);
        for c in 0..3 {
            linear[c] += w * v[c];
        }
        angular[0] += w * (x[1] * v[2] - x[2] * v[1]);
        angular[1] += w * (x[2] * v[0] - x[0] * v[2]);
        angular[2] += w * (x[0] * v[1] - x[1] * v[0]);
    }
    if any_periodic {
        if angular.iter().any(|a| a.abs() > 0.0) {
            // The weight x is not well defined on the torus; only the linear
            // part is meaningful there.
            return Err(FieldError::PeriodicAngular);
        }
        return Err(FieldError::PeriodicAngular);
    }
    Ok((linear, angular))
}

/// Linear momentum only (valid on periodic grids too).
pub fn linear_momentum(u: &VectorField, it: usize) -> [f64; 3] {
    let g = u.grid().clone();
    let mut linear = [0.0; 3];
    for s in 0..g.slice_len() {
        let w = g.quad_weight(s);
        let (ix, iy, iz) = g.spatial_coords(s);
        let v = u.at(it, ix, iy, iz);
        for c in 0..3 {
            linear[c] += w * v[c];
        }
    }
    linear
}
