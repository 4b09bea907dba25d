use fields_core::FrequencyEnergyLevels;
use iteration::{
    choose_parameters, parametrix_expand, CPatch, OscillatoryForce, PatchBox, RPatch, StageConfig,
};
use proptest::prelude::*;

fn levels_strategy() -> impl Strategy<Value = FrequencyEnergyLevels> {
    (2.0f64..64.0, 1e-3f64..4.0, 0.1f64..1.0).prop_map(|(xi, e_v, ratio)| {
        FrequencyEnergyLevels {
            xi,
            e_v,
            e_r: e_v * ratio,
            order: 2,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn admissible_parameters_are_ordered(lv in levels_strategy(), extra in 1.0f64..8.0) {
        let cfg = StageConfig::default();
        let n = (lv.e_v / lv.e_r).powf(1.5) * extra;
        let p = choose_parameters(&lv, n, &cfg).unwrap();
        // The sharp time gain never exceeds one once N is admissible.
        prop_assert!(p.b <= 1.0 + 1e-12);
        prop_assert!(p.tau <= cfg.b0 * p.theta * (1.0 + 1e-12));
        prop_assert!(p.lambda >= cfg.b_lambda * lv.xi);
        prop_assert!(p.rho > 0.0 && p.eps_v > 0.0 && p.eps_x > 0.0 && p.eps_t > 0.0);
        // The output levels are admissible for the next stage.
        prop_assert!(p.e_r_next <= p.e_v_next * (1.0 + 1e-12));
        prop_assert!(p.xi_next >= 2.0);
    }

    #[test]
    fn symbol_inverts_the_leading_divergence(
        gx in 0.3f64..1.5, gy in -1.0f64..1.0, gz in -1.0f64..1.0,
        ur in prop::array::uniform3(-1.0f64..1.0),
        ui in prop::array::uniform3(-1.0f64..1.0),
    ) {
        // At each node the expansion's first term satisfies the exact
        // symbol equation (i∇ξ)·q = u, row-contracted over the first index.
        let g = [gx, gy, gz];
        let bx = PatchBox { t0: 0, t1: 0, lo: [0; 3], hi: [6; 3] };
        let mut xi = RPatch::<1>::zeros(bx);
        let mut grad = RPatch::<3>::zeros(bx);
        let mut u = CPatch::<3>::zeros(bx);
        for iz in 0..7 {
            for iy in 0..7 {
                for ix in 0..7 {
                    xi.set(0, ix, iy, iz, [0.0]);
                    grad.set(0, ix, iy, iz, g);
                }
            }
        }
        u.set(0, 3, 3, 3, ur, ui);
        let force = OscillatoryForce {
            xi: &xi, grad: &grad, u, lambda: 10.0, offset: 0.0, floor: 1e-3, h: [0.1; 3],
        };
        let exp = parametrix_expand(&force, 1).unwrap();
        let (qre, qim) = exp.q.get(0, 3, 3, 3);
        const SYM: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
        for l in 0..3 {
            let mut dre = 0.0;
            let mut dim = 0.0;
            for j in 0..3 {
                dre += g[j] * qre[SYM[j][l]];
                dim += g[j] * qim[SYM[j][l]];
            }
            // (i g)·(qre + i qim) = −g·qim + i g·qre.
            prop_assert!((-dim - ur[l]).abs() < 1e-10, "re row {l}: {} vs {}", -dim, ur[l]);
            prop_assert!((dre - ui[l]).abs() < 1e-10, "im row {l}: {} vs {}", dre, ui[l]);
        }
    }

    #[test]
    fn patch_derivative_is_exact_on_linear_data(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0,
    ) {
        let bx = PatchBox { t0: 0, t1: 0, lo: [0; 3], hi: [10; 3] };
        let h = 0.2;
        let mut p = RPatch::<1>::zeros(bx);
        for iz in 0..11 {
            for iy in 0..11 {
                for ix in 0..11 {
                    let x = [ix as f64 * h, iy as f64 * h, iz as f64 * h];
                    p.set(0, ix, iy, iz, [a * x[0] + b * x[1] + c * x[2] + d]);
                }
            }
        }
        // Fourth-order stencil with zero extension: exact on the interior
        // where the stencil never reaches outside the box.
        let want = [a, b, c];
        for (axis, w) in want.iter().enumerate() {
            let dp = p.deriv_axis(axis, h);
            for iz in 2..9 {
                for iy in 2..9 {
                    for ix in 2..9 {
                        let got = dp.get(0, ix, iy, iz)[0];
                        prop_assert!((got - w).abs() < 1e-10, "axis {axis}: {got} vs {w}");
                    }
                }
            }
        }
    }
}
