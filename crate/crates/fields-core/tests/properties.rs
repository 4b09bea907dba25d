//! Property-based checks for the level estimator and field algebra.

use fields_core::*;
use proptest::prelude::*;
use std::f64::consts::PI;

/// Random band-limited velocity field on a small periodic grid.
fn random_state(seed: u64) -> EulerReynoldsState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = Grid::periodic_box(16, 3, 0.0, 0.1);
    let mut modes = Vec::new();
    for _ in 0..4 {
        let k = [
            rng.gen_range(-3i32..=3) as f64 * PI,
            rng.gen_range(-3i32..=3) as f64 * PI,
            rng.gen_range(-3i32..=3) as f64 * PI,
        ];
        let a: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let ph: f64 = rng.gen_range(0.0..2.0 * PI);
        modes.push((k, a, ph));
    }
    let mut s = EulerReynoldsState::zero(&g);
    s.v = VectorField::from_fn(&g, |_, x| {
        let mut v = [0.0; 3];
        for (k, a, ph) in &modes {
            let z = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).sin();
            for c in 0..3 {
                v[c] += a[c] * z;
            }
        }
        v
    });
    s.r = SymmetricTensorField::from_fn(&g, |_, x| {
        let z = (PI * x[0]).cos() * (PI * x[1]).sin();
        [0.1 * z, 0.0, 0.05 * z, -0.1 * z, 0.0, 0.02 * z]
    });
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The estimator's output levels always dominate the state's own norms.
    #[test]
    fn estimated_levels_are_admissible(seed in 0u64..1000) {
        let s = random_state(seed);
        let lv = estimate_levels(&s, 2).unwrap();
        check_levels(&s, &lv, 1.0 + 1e-9).unwrap();
    }

    /// Shrinking a state never grows its levels (monotone in the dominance
    /// direction actually realizable by scaling).
    #[test]
    fn estimated_levels_monotone_under_scaling(seed in 0u64..1000, a in 0.05f64..1.0) {
        let s = random_state(seed);
        let lv = estimate_levels(&s, 2).unwrap();
        let mut small = s.clone();
        small.v.scale(a);
        small.p.scale(a * a);
        small.r.scale(a * a);
        let lvs = estimate_levels(&small, 2).unwrap();
        prop_assert!(lvs.xi <= lv.xi * 1.0001);
        prop_assert!(lvs.e_v <= lv.e_v * 1.0001);
        prop_assert!(lvs.e_r <= lv.e_r * 1.0001);
    }

    /// A state dominated by another satisfies the dominator's levels.
    #[test]
    fn dominated_state_passes_dominator_levels(seed in 0u64..1000, a in 0.05f64..1.0) {
        let s = random_state(seed);
        let lv = estimate_levels(&s, 2).unwrap();
        let mut small = s.clone();
        small.v.scale(a);
        small.p.scale(a * a);
        small.r.scale(a * a);
        check_levels(&small, &lv, 1.0 + 1e-9).unwrap();
    }

    /// Trapezoid integral of a divergence over the periodic box is zero.
    #[test]
    fn divergence_integrates_to_zero(seed in 0u64..1000) {
        let s = random_state(seed);
        let d = divergence(&s.v).unwrap();
        let g = d.grid().clone();
        let mut total = 0.0;
        for sidx in 0..g.slice_len() {
            let (ix, iy, iz) = g.spatial_coords(sidx);
            total += g.quad_weight(sidx) * d.at(0, ix, iy, iz);
        }
        prop_assert!(total.abs() < 1e-10 * (1.0 + d.sup_norm()));
    }
}
