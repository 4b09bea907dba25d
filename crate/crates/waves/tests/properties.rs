use proptest::prelude::*;
use waves::{companion_face, eta_profile, init_frame, solve_gamma_node, DodecahedralFrame};

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn quad_stress(grads: &[[f64; 3]; 12], gammas: &[f64; 6]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for p in 0..6 {
        let g = grads[2 * p];
        let gs = grads[companion_face(2 * p)];
        let g2 = dot(g, g);
        let proj = dot(gs, g) / g2;
        let b = [gs[0] - proj * g[0], gs[1] - proj * g[1], gs[2] - proj * g[2]];
        let gn = g2.sqrt();
        let a = cross([-g[0] / gn, -g[1] / gn, -g[2] / gn], b);
        let w = 2.0 * gammas[p] * gammas[p];
        out[0] += w * (a[0] * a[0] + b[0] * b[0]);
        out[1] += w * (a[0] * a[1] + b[0] * b[1]);
        out[2] += w * (a[0] * a[2] + b[0] * b[2]);
        out[3] += w * (a[1] * a[1] + b[1] * b[1]);
        out[4] += w * (a[1] * a[2] + b[1] * b[2]);
        out[5] += w * (a[2] * a[2] + b[2] * b[2]);
    }
    out
}

proptest! {
    /// The squared time profile tiles every real shift of the unit
    /// lattice exactly.
    #[test]
    fn eta_squares_partition_unity(t in -10.0f64..10.0) {
        let base = t.floor() as i64;
        let sum: f64 = (base - 2..=base + 2)
            .map(|y| eta_profile(t - y as f64).powi(2))
            .sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "t = {t}: {sum}");
    }

    /// The profile stays inside [0, 1] and vanishes outside |u| < 2/3.
    #[test]
    fn eta_stays_in_range(u in -2.0f64..2.0) {
        let v = eta_profile(u);
        prop_assert!((0.0..=1.0).contains(&v));
        if u.abs() >= 2.0 / 3.0 {
            prop_assert!(v == 0.0);
        }
        if u.abs() <= 1.0 / 3.0 {
            prop_assert!(v == 1.0);
        }
    }

    /// For any rotation class and any small anisotropy the six-pair
    /// solve reconstructs the prescribed tensor, keeps every magnitude
    /// positive, and preserves the trace identity.
    #[test]
    fn gamma_solve_reconstructs_small_anisotropy(
        class in 0usize..16,
        exx in -0.02f64..0.02,
        exy in -0.02f64..0.02,
        exz in -0.02f64..0.02,
        eyy in -0.02f64..0.02,
        eyz in -0.02f64..0.02,
        ezz in -0.02f64..0.02,
    ) {
        let frame = init_frame().unwrap();
        let grads: [[f64; 3]; 12] =
            std::array::from_fn(|f| frame.direction_class(class, f));
        let eps = [exx, exy, exz, eyy, eyz, ezz];
        let (gammas, residual) = solve_gamma_node(&grads, eps, 1e-10).unwrap();
        prop_assert!(residual < 1e-10);
        for gm in gammas {
            prop_assert!(gm > 0.0 && gm.is_finite());
        }
        let rec = quad_stress(&grads, &gammas);
        for c in 0..6 {
            let want = if c == 0 || c == 3 || c == 5 { 1.0 / 3.0 } else { 0.0 } + eps[c];
            prop_assert!((rec[c] - want).abs() < 1e-9, "comp {c}: {} vs {want}", rec[c]);
        }
        let trace = rec[0] + rec[3] + rec[5];
        prop_assert!((trace - (1.0 + exx + eyy + ezz)).abs() < 1e-9);
    }

    /// Perturbing the phase gradients within the drift ceiling keeps
    /// the solve well-posed.
    #[test]
    fn gamma_solve_tolerates_drift(
        class in 0usize..16,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let frame = init_frame().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut drifted: [[f64; 3]; 12] =
            std::array::from_fn(|f| frame.direction_class(class, f));
        // Conjugate faces drift together: ξ_{-I} = -ξ_I exactly.
        for p in 0..6 {
            let dv: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.05..0.05));
            for c in 0..3 {
                drifted[2 * p][c] += dv[c];
                drifted[2 * p + 1][c] -= dv[c];
            }
        }
        let (gammas, residual) = solve_gamma_node(&drifted, [0.0; 6], 1e-9).unwrap();
        prop_assert!(residual < 1e-9);
        let rec = quad_stress(&drifted, &gammas);
        for c in 0..6 {
            let want = if c == 0 || c == 3 || c == 5 { 1.0 / 3.0 } else { 0.0 };
            prop_assert!((rec[c] - want).abs() < 1e-8);
        }
    }
}

#[test]
fn rotation_classes_cover_all_parities() {
    for k1 in -2i64..=2 {
        for k2 in -2i64..=2 {
            for k3 in -2i64..=2 {
                for k0 in 0i64..=3 {
                    let class = DodecahedralFrame::rotation_class(&[k0, k1, k2, k3]);
                    let expect = (k0.rem_euclid(2)
                        + (k1.rem_euclid(2)) * 2
                        + (k2.rem_euclid(2)) * 4
                        + (k3.rem_euclid(2)) * 8) as usize;
                    assert_eq!(class, expect);
                }
            }
        }
    }
}
