use fields_core::{Grid, VectorField};
use flow_geometry::FlowMap;
use proptest::prelude::*;

/// Velocity v(x) = A x with a traceless matrix A: divergence-free, and
/// trilinear interpolation reproduces it exactly, so the only numerical
/// error in play is the integrator's.
fn linear_field(a: [[f64; 3]; 3]) -> FlowMap {
    let g = Grid::bounded_box(17, 5, 0.0, 1.0);
    let v = VectorField::from_fn(&g, |_, x| {
        [
            a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
            a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
            a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
        ]
    });
    FlowMap::new(v, 1e-3)
}

fn traceless() -> impl Strategy<Value = [[f64; 3]; 3]> {
    proptest::array::uniform3(proptest::array::uniform3(-0.5f64..0.5)).prop_map(|mut a| {
        let tr = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
        for i in 0..3 {
            a[i][i] -= tr;
        }
        a
    })
}

fn dist(p: [f64; 3], q: [f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn group_property_holds(
        a in traceless(),
        q in proptest::array::uniform3(-0.2f64..0.2),
        s in 0.01f64..0.2,
        sigma in 0.01f64..0.2,
    ) {
        let m = linear_field(a);
        let tol = 10.0 * m.step().powi(4) * (s + sigma).max(1.0);
        let (t1, x1) = m.flow(0.2, q, sigma).unwrap();
        let (_, x2) = m.flow(t1, x1, s).unwrap();
        let (_, x12) = m.flow(0.2, q, s + sigma).unwrap();
        prop_assert!(dist(x2, x12) <= tol, "gap {}", dist(x2, x12));
    }

    #[test]
    fn backward_forward_identity(
        a in traceless(),
        q in proptest::array::uniform3(-0.2f64..0.2),
        s in 0.01f64..0.3,
    ) {
        let m = linear_field(a);
        let (t1, x1) = m.flow(0.2, q, s).unwrap();
        let (_, back) = m.flow(t1, x1, -s).unwrap();
        prop_assert!(dist(back, q) <= 10.0 * m.step().powi(4), "gap {}", dist(back, q));
    }

    #[test]
    fn divergence_free_flow_preserves_volume(
        a in traceless(),
        c in proptest::array::uniform3(-0.15f64..0.15),
        s in 0.05f64..0.3,
    ) {
        let m = linear_field(a);
        // Flow the 8 corners of a small cube and measure the image volume
        // as a parallelepiped spanned by the flowed edge vectors (exact for
        // linear velocities, whose flows are linear maps).
        let e = 0.02;
        let mut img = [[0.0f64; 3]; 4];
        for (k, d) in [[0.0, 0.0, 0.0], [e, 0.0, 0.0], [0.0, e, 0.0], [0.0, 0.0, e]]
            .iter()
            .enumerate()
        {
            let x = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
            img[k] = m.flow(0.2, x, s).unwrap().1;
        }
        let u = [img[1][0] - img[0][0], img[1][1] - img[0][1], img[1][2] - img[0][2]];
        let v = [img[2][0] - img[0][0], img[2][1] - img[0][1], img[2][2] - img[0][2]];
        let w = [img[3][0] - img[0][0], img[3][1] - img[0][1], img[3][2] - img[0][2]];
        let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
            + u[2] * (v[0] * w[1] - v[1] * w[0]);
        let rel = (det / (e * e * e) - 1.0).abs();
        prop_assert!(rel < 1e-4, "relative volume drift {}", rel);
    }
}
