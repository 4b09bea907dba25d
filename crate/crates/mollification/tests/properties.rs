//! Randomized invariants for the smoothing kernels and spatial mollifier.

use fields_core::{Grid, ScalarField};
use mollification::{mollify_space, MollKernel};
use proptest::prelude::*;
use std::sync::Arc;

fn random_grid(n: usize) -> Arc<Grid> {
    Grid::periodic_box(n, 2, 0.0, 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Kernel weights always sum to one, for any admissible scale and
    /// moment-killing order, on both the lattice and the time quadrature.
    #[test]
    fn kernel_mass_is_one(
        n in 16usize..28,
        scale_cells in 2.2f64..6.0,
        order in 1usize..5,
    ) {
        let g = random_grid(n);
        let scale = scale_cells * g.dx(0);
        let k = MollKernel::lattice_space(&g, scale, order, false).unwrap();
        prop_assert!((k.mass() - 1.0).abs() < 1e-12);
        let kt = MollKernel::quad_time(scale, order, false).unwrap();
        prop_assert!((kt.mass() - 1.0).abs() < 1e-12);
    }

    /// Nonnegative kernels map nonnegative data to nonnegative data.
    #[test]
    fn nonnegative_data_stays_nonnegative(
        n in 16usize..24,
        scale_cells in 2.2f64..5.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let g = random_grid(n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = ScalarField::zeros(&g);
        for v in f.data_mut() {
            *v = rng.gen_range(0.0..3.0);
        }
        let k = MollKernel::lattice_space(&g, scale_cells * g.dx(0), 2, true).unwrap();
        let s = mollify_space(&f, &k).unwrap();
        prop_assert!(s.data().iter().all(|&v| v >= -1e-14));
    }

    /// Spatial mollification never increases the sup norm (the kernel has
    /// unit mass and, in the nonnegative case, is a convex average).
    #[test]
    fn nonnegative_kernel_is_sup_contraction(
        n in 16usize..24,
        scale_cells in 2.2f64..5.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let g = random_grid(n);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut f = ScalarField::zeros(&g);
        for v in f.data_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let sup_in = f.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let k = MollKernel::lattice_space(&g, scale_cells * g.dx(0), 2, true).unwrap();
        let s = mollify_space(&f, &k).unwrap();
        let sup_out = s.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        prop_assert!(sup_out <= sup_in * (1.0 + 1e-12));
    }
}
