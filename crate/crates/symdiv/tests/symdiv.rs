//! Oracle tests for the divergence solvers: closure, support, moment gates,
//! gain in the weight radius, and advective commutation.

use fields_core::{deriv_axis, sym_div, Grid, ScalarField, SymmetricTensorField, VectorField};
use flow_geometry::FlowMap;
use symdiv::{
    build_zeta, scalar_bogovskii, symdiv_solve, verify_advective_commutation,
    verify_symdiv_bounds, SymDivError, SymDivOptions,
};
use std::sync::Arc;

fn opts(gl: usize) -> SymDivOptions {
    SymDivOptions {
        gl_nodes: gl,
        ..Default::default()
    }
}

/// Radial profile `(1 - s2)^4` clipped to its support.
fn bump(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - s2).powi(4)
    }
}

fn still_flow(g: &Arc<Grid>) -> FlowMap {
    let v = VectorField::zeros(g);
    FlowMap::new(v, g.dt().min(0.05))
}

/// Smooth symmetric tensor supported in the ball of radius `r0` about `c`,
/// with all six components independent.
fn manufactured_tensor(g: &Arc<Grid>, c: [f64; 3], r0: f64) -> SymmetricTensorField {
    SymmetricTensorField::from_fn(g, |_t, x| {
        let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        let s2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (r0 * r0);
        let b = bump(s2);
        [
            b * (1.0 + 0.5 * d[0] / r0),
            b * (0.8 - 0.4 * d[1] / r0),
            b * (-0.6 + 0.3 * d[2] / r0),
            b * 0.7 * d[0] / r0,
            b * (0.2 + 0.6 * d[1] / r0),
            b * (-0.9 + 0.2 * d[0] * d[1] / (r0 * r0)),
        ]
    })
}

#[test]
fn zero_data_gives_zero_solution() {
    let g = Grid::bounded_box(24, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.5).unwrap();
    let u = VectorField::zeros(&g);
    let sol = symdiv_solve(&u, &zeta, &opts(8)).unwrap();
    assert_eq!(sol.r.sup_norm(), 0.0);
    assert_eq!(sol.residual_rel_l2, 0.0);

    let s = ScalarField::zeros(&g);
    let r = scalar_bogovskii(&s, &zeta, 1, &opts(8)).unwrap();
    assert_eq!(r.sup_norm(), 0.0);
}

#[test]
fn weight_has_unit_mass_and_rides_a_constant_flow() {
    let g = Grid::bounded_box(32, 9, 0.0, 0.4);
    let vel = [0.5, -0.3, 0.2];
    let v = VectorField::from_fn(&g, |_t, _x| vel);
    let flow = FlowMap::new(v, 0.01);
    let t_c = 0.2;
    let x_c = [-0.1, 0.05, 0.0];
    let zeta = build_zeta(&flow, t_c, x_c, 0.2, 0.4).unwrap();
    let (lo, hi) = zeta.window();
    assert_eq!((lo, hi), (0, 8));
    for it in lo..=hi {
        let dt = g.t(it) - t_c;
        let c = zeta.center(it);
        for a in 0..3 {
            assert!(
                (c[a] - (x_c[a] + dt * vel[a])).abs() < 1e-10,
                "slice {it} axis {a}"
            );
        }
        assert!((zeta.mass(it) - 1.0).abs() < 1e-12, "mass at slice {it}");
        let vb = zeta.v_bar(it);
        for a in 0..3 {
            assert!((vb[a] - vel[a]).abs() < 1e-12);
        }
    }
    // Bound constants of the bump profile, nondimensionalized by the radius.
    assert!(zeta.bound_constants[0] > 1.0 && zeta.bound_constants[0] < 5.0);
    assert!(zeta.bound_constants[1] > 2.0 && zeta.bound_constants[1] < 10.0);
}

#[test]
fn weight_rejects_bad_geometry() {
    let g = Grid::bounded_box(24, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    match build_zeta(&flow, 0.05, [0.0; 3], 0.1, 0.05) {
        Err(SymDivError::UnderResolved { .. }) => {}
        other => panic!("expected under-resolved rejection, got {:?}", other.is_ok()),
    }

    // A fast constant drift carries the centre out of the bounded box.
    let g2 = Grid::bounded_box(24, 9, 0.0, 2.0);
    let v = VectorField::from_fn(&g2, |_t, _x| [3.0, 0.0, 0.0]);
    let flow2 = FlowMap::new(v, 0.01);
    match build_zeta(&flow2, 1.0, [0.5, 0.0, 0.0], 1.0, 0.3) {
        Err(SymDivError::CenterEscape) => {}
        other => panic!("expected centre escape, got {:?}", other.is_ok()),
    }
}

#[test]
fn scalar_solver_closes_on_a_bump_derivative() {
    let g = Grid::bounded_box(32, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let rho = 0.5;
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, rho).unwrap();
    let phi = ScalarField::from_fn(&g, |_t, x| {
        bump((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (0.35 * 0.35))
    });
    // Discrete derivative: its lattice mean telescopes to zero exactly.
    let u = deriv_axis(&phi, 0);
    let it = 1;
    let r = scalar_bogovskii(&u, &zeta, it, &opts(16)).unwrap();

    let div = fields_core::divergence(&r).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for s in 0..g.slice_len() {
        let (ix, iy, iz) = g.spatial_coords(s);
        let e = div.at(it, ix, iy, iz) - u.at(it, ix, iy, iz);
        num += e * e;
        den += u.at(it, ix, iy, iz).powi(2);
    }
    let res = (num / den).sqrt();
    assert!(res <= 0.1, "scalar closure residual {res}");

    // Support: the solution lives in the weight ball plus one cell.
    let cell = 3f64.sqrt() * g.dx(0);
    for s in 0..g.slice_len() {
        let (ix, iy, iz) = g.spatial_coords(s);
        let x = [g.x(0, ix), g.x(1, iy), g.x(2, iz)];
        let v = r.at(it, ix, iy, iz);
        let mag = v[0].abs().max(v[1].abs()).max(v[2].abs());
        if g.distance(x, [0.0; 3]) > rho + cell {
            assert!(mag <= 1e-14 * r.sup_norm());
        }
    }
}

#[test]
fn scalar_solver_rejects_nonzero_mean() {
    let g = Grid::bounded_box(24, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.5).unwrap();
    let u = ScalarField::from_fn(&g, |_t, x| {
        bump((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.09)
    });
    match scalar_bogovskii(&u, &zeta, 1, &opts(8)) {
        Err(SymDivError::MomentDefect { linear, .. }) => {
            assert!(linear[0].abs() > 1e-4, "defect should be visible");
        }
        other => panic!("expected moment rejection, got {:?}", other.is_ok()),
    }
}

#[test]
fn symmetric_solver_closes_on_manufactured_stress() {
    let g = Grid::bounded_box(32, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let rho = 0.5;
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, rho).unwrap();
    let stress = manufactured_tensor(&g, [0.0; 3], 0.35);
    let u = sym_div(&stress).unwrap();
    let sol = symdiv_solve(&u, &zeta, &opts(16)).unwrap();
    assert!(
        sol.residual_rel_l2 <= 0.1,
        "closure residual {}",
        sol.residual_rel_l2
    );

    // Symmetry is structural; the parts must add up to the returned tensor.
    let mut sum = sol.parts[0].clone();
    sum.axpy(1.0, &sol.parts[1]);
    sum.axpy(1.0, &sol.parts[2]);
    sum.axpy(-1.0, &sol.r);
    assert!(sum.sup_norm() <= 1e-14 * sol.r.sup_norm());

    // Support: nothing outside the mask.
    let scale = sol.r.sup_norm();
    for it in 0..g.nt {
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            if !sol.support.get(it, ix, iy, iz) {
                let v = sol.r.at6(it, ix, iy, iz);
                for c in 0..6 {
                    assert!(v[c].abs() <= 1e-14 * scale);
                }
            }
        }
    }
}

#[test]
fn closure_residual_decreases_under_refinement() {
    let mut residuals = Vec::new();
    for n in [24usize, 36] {
        let g = Grid::bounded_box(n, 3, 0.0, 0.1);
        let flow = still_flow(&g);
        let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.5).unwrap();
        let stress = manufactured_tensor(&g, [0.0; 3], 0.35);
        let u = sym_div(&stress).unwrap();
        let sol = symdiv_solve(&u, &zeta, &opts(16)).unwrap();
        residuals.push(sol.residual_rel_l2);
    }
    assert!(
        residuals[1] < residuals[0],
        "residuals did not decrease: {residuals:?}"
    );
}

#[test]
fn angular_moment_violation_is_rejected() {
    let g = Grid::bounded_box(28, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.5).unwrap();
    // d/dy of a bump in the first slot: the mean telescopes to zero but the
    // xy angular moment equals the bump mass.
    let psi = ScalarField::from_fn(&g, |_t, x| {
        bump((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.09)
    });
    let dpsi = deriv_axis(&psi, 1);
    let mut u = VectorField::zeros(&g);
    for it in 0..g.nt {
        for s in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(s);
            u.set(it, ix, iy, iz, [dpsi.at(it, ix, iy, iz), 0.0, 0.0]);
        }
    }
    match symdiv_solve(&u, &zeta, &opts(8)) {
        Err(SymDivError::MomentDefect {
            linear, angular, ..
        }) => {
            assert!(linear.iter().all(|v| v.abs() < 1e-10));
            assert!(angular[2].abs() > 1e-4, "xy defect expected: {angular:?}");
        }
        other => panic!("expected angular rejection, got {:?}", other.is_ok()),
    }
}

#[test]
fn data_outside_the_cylinder_is_rejected() {
    let g = Grid::bounded_box(28, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.3).unwrap();
    // Supported at distance 0.6 from the weight centre, outside its ball.
    let stress = manufactured_tensor(&g, [0.6, 0.0, 0.0], 0.2);
    let u = sym_div(&stress).unwrap();
    match symdiv_solve(&u, &zeta, &opts(8)) {
        Err(SymDivError::SupportViolation { .. }) => {}
        other => panic!("expected support rejection, got {:?}", other.is_ok()),
    }
}

#[test]
fn solution_is_linear_in_the_data() {
    let g = Grid::bounded_box(24, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.5).unwrap();
    let s1 = manufactured_tensor(&g, [0.05, 0.0, 0.0], 0.3);
    let s2 = manufactured_tensor(&g, [-0.05, 0.05, 0.0], 0.25);
    let u1 = sym_div(&s1).unwrap();
    let u2 = sym_div(&s2).unwrap();
    let (a, b) = (1.7, -0.6);
    let mut u = u1.clone();
    u.scale(a);
    u.axpy(b, &u2);

    let o = opts(8);
    let sol1 = symdiv_solve(&u1, &zeta, &o).unwrap();
    let sol2 = symdiv_solve(&u2, &zeta, &o).unwrap();
    let sol = symdiv_solve(&u, &zeta, &o).unwrap();

    let mut combo = sol1.r.clone();
    combo.scale(a);
    combo.axpy(b, &sol2.r);
    combo.axpy(-1.0, &sol.r);
    assert!(
        combo.sup_norm() <= 1e-10 * sol.r.sup_norm(),
        "linearity gap {}",
        combo.sup_norm() / sol.r.sup_norm()
    );
}

#[test]
fn gain_scales_linearly_with_the_weight_radius() {
    // Self-similar data: shrinking the data and the weight together halves
    // the output-to-input ratio.
    let mut ratios = Vec::new();
    for &rho in &[0.5f64, 0.25] {
        let g = Grid::bounded_box(40, 3, 0.0, 0.1);
        let flow = still_flow(&g);
        let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, rho).unwrap();
        let stress = manufactured_tensor(&g, [0.0; 3], 0.7 * rho);
        let u = sym_div(&stress).unwrap();
        let sol = symdiv_solve(&u, &zeta, &opts(16)).unwrap();
        ratios.push(sol.r.sup_norm() / u.sup_norm());
    }
    let gain = ratios[0] / ratios[1];
    assert!(
        (gain - 2.0).abs() <= 0.5,
        "gain {gain} should be 2 within 25%"
    );
}

#[test]
fn lp_lq_report_on_a_closure_solve() {
    let g = Grid::bounded_box(28, 3, 0.0, 0.1);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.05, [0.0; 3], 0.2, 0.5).unwrap();
    let stress = manufactured_tensor(&g, [0.0; 3], 0.35);
    let u = sym_div(&stress).unwrap();
    let sol = symdiv_solve(&u, &zeta, &opts(16)).unwrap();

    let inf = f64::INFINITY;
    let rep = verify_symdiv_bounds(&u, &sol, &zeta, inf, inf, 20.0);
    assert!(rep.admissible);
    assert!(rep.ratio > 0.0);
    assert!(rep.pass, "ratio {} vs gain {}", rep.ratio, rep.expected_gain);

    // The scaling-critical exponent pair is refused.
    let crit = verify_symdiv_bounds(&u, &sol, &zeta, 3.0, inf, 20.0);
    assert!(!crit.admissible);

    let zero = VectorField::zeros(&g);
    let zsol = symdiv_solve(&zero, &zeta, &opts(8)).unwrap();
    let zrep = verify_symdiv_bounds(&zero, &zsol, &zeta, inf, inf, 20.0);
    assert_eq!(zrep.ratio, 0.0);
}

#[test]
fn advective_commutation_for_static_data_without_flow() {
    let g = Grid::bounded_box(24, 5, 0.0, 0.2);
    let flow = still_flow(&g);
    let zeta = build_zeta(&flow, 0.1, [0.0; 3], 0.3, 0.5).unwrap();
    let stress = manufactured_tensor(&g, [0.0; 3], 0.35);
    let u = sym_div(&stress).unwrap();
    let rep = verify_advective_commutation(&u, &zeta, &opts(8), 1e-10).unwrap();
    assert!(rep.pass, "sup difference {}", rep.sup_difference);
}

#[test]
fn advective_commutation_for_transported_data() {
    let g = Grid::periodic_box(24, 9, 0.0, 0.4);
    let vel = [0.3, -0.2, 0.1];
    let v = VectorField::from_fn(&g, |_t, _x| vel);
    let flow = FlowMap::new(v, 0.01);
    let zeta = build_zeta(&flow, 0.2, [0.0; 3], 0.25, 0.6).unwrap();
    // Data transported by the same constant velocity, small enough that its
    // derivatives (two extra stencil cells) stay inside the weight ball.
    let r0 = 0.3;
    let stress = SymmetricTensorField::from_fn(&g, |t, x| {
        let d = [
            x[0] - (t - 0.2) * vel[0],
            x[1] - (t - 0.2) * vel[1],
            x[2] - (t - 0.2) * vel[2],
        ];
        let s2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (r0 * r0);
        let b = bump(s2);
        [
            b,
            0.5 * b,
            -0.3 * b,
            b * d[0] / r0,
            0.2 * b,
            b * d[1] / r0,
        ]
    });
    let u = sym_div(&stress).unwrap();
    let sol = symdiv_solve(&u, &zeta, &opts(12)).unwrap();
    let scale = sol.r.sup_norm();
    let rep = verify_advective_commutation(&u, &zeta, &opts(12), 0.3 * scale).unwrap();
    assert!(
        rep.pass,
        "sup difference {} vs scale {}",
        rep.sup_difference, scale
    );
}
