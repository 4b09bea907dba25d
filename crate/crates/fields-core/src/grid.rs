use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Uniform space-time grid over `[t0,t1] x prod_a [x0[a], x1[a]]`.
///
/// On a periodic axis the endpoints are identified and nodes sit at
/// `x0 + i*dx` with `dx = len/n` (the right endpoint is not stored).  On a
/// bounded axis nodes include both endpoints, `dx = len/(n-1)`.  Time is
/// always bounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: [f64; 3],
    pub x1: [f64; 3],
    /// Nodes per spatial axis, ordered `[nx, ny, nz]`.
    pub n: [usize; 3],
    pub periodic: [bool; 3],
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(
        x0: [f64; 3],
        x1: [f64; 3],
        n: [usize; 3],
        periodic: [bool; 3],
        t0: f64,
        t1: f64,
        nt: usize,
    ) -> Arc<Grid> {
        assert!(nt >= 2, "grid needs at least 2 time slices");
        for a in 0..3 {
            assert!(x1[a] > x0[a], "empty spatial extent on axis {a}");
            assert!(n[a] >= 5, "axis {a} under-resolved for 4th-order stencils");
        }
        assert!(t1 > t0, "empty time interval");
        Arc::new(Grid {
            x0,
            x1,
            n,
            periodic,
            t0,
            t1,
            nt,
        })
    }

    /// Periodic unit box `[-1,1]^3` with a short time interval.
    pub fn periodic_box(n: usize, nt: usize, t0: f64, t1: f64) -> Arc<Grid> {
        Grid::new(
            [-1.0; 3],
            [1.0; 3],
            [n; 3],
            [true; 3],
            t0,
            t1,
            nt,
        )
    }

    /// Bounded (compact-support) box `[-1,1]^3`.
    pub fn bounded_box(n: usize, nt: usize, t0: f64, t1: f64) -> Arc<Grid> {
        Grid::new(
            [-1.0; 3],
            [1.0; 3],
            [n; 3],
            [false; 3],
            t0,
            t1,
            nt,
        )
    }

    #[inline]
    pub fn dx(&self, axis: usize) -> f64 {
        let len = self.x1[axis] - self.x0[axis];
        if self.periodic[axis] {
            len / self.n[axis] as f64
        } else {
            len / (self.n[axis] - 1) as f64
        }
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.nt - 1) as f64
    }

    #[inline]
    pub fn x(&self, axis: usize, i: usize) -> f64 {
        self.x0[axis] + i as f64 * self.dx(axis)
    }

    #[inline]
    pub fn t(&self, it: usize) -> f64 {
        self.t0 + it as f64 * self.dt()
    }

    /// Nodes in one time slice.
    #[inline]
    pub fn slice_len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.slice_len() * self.nt
    }

    /// Flat node index in `(t, z, y, x)` order.
    #[inline]
    pub fn idx(&self, it: usize, ix: usize, iy: usize, iz: usize) -> usize {
        ((it * self.n[2] + iz) * self.n[1] + iy) * self.n[0] + ix
    }

    #[inline]
    pub fn spatial_idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n[1] + iy) * self.n[0] + ix
    }

    /// Inverse of [`Grid::spatial_idx`].
    #[inline]
    pub fn spatial_coords(&self, s: usize) -> (usize, usize, usize) {
        let ix = s % self.n[0];
        let iy = (s / self.n[0]) % self.n[1];
        let iz = s / (self.n[0] * self.n[1]);
        (ix, iy, iz)
    }

    pub fn node_pos(&self, s: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.spatial_coords(s);
        [self.x(0, ix), self.x(1, iy), self.x(2, iz)]
    }

    /// Wrap a spatial point onto the fundamental domain on periodic axes.
    pub fn wrap(&self, mut x: [f64; 3]) -> [f64; 3] {
        for a in 0..3 {
            if self.periodic[a] {
                let len = self.x1[a] - self.x0[a];
                x[a] = (x[a] - self.x0[a]).rem_euclid(len) + self.x0[a];
            }
        }
        x
    }

    /// Minimal-image displacement `a - b` respecting periodicity.
    pub fn displacement(&self, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for ax in 0..3 {
            let mut v = a[ax] - b[ax];
            if self.periodic[ax] {
                let len = self.x1[ax] - self.x0[ax];
                v -= (v / len).round() * len;
            }
            d[ax] = v;
        }
        d
    }

    pub fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let d = self.displacement(a, b);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// True if `x` lies inside the spatial box (always true on periodic axes).
    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| self.periodic[a] || (x[a] >= self.x0[a] && x[a] <= self.x1[a]))
    }

    /// Trapezoid quadrature weight of spatial node `s` (product rule; periodic
    /// axes weigh every node equally).
    pub fn quad_weight(&self, s: usize) -> f64 {
        let (ix, iy, iz) = self.spatial_coords(s);
        let mut w = self.dx(0) * self.dx(1) * self.dx(2);
        for (a, i) in [(0usize, ix), (1, iy), (2, iz)] {
            if !self.periodic[a] && (i == 0 || i == self.n[a] - 1) {
                w *= 0.5;
            }
        }
        w
    }

    /// Same grid with a different resolution.
    pub fn with_resolution(&self, n: [usize; 3], nt: usize) -> Arc<Grid> {
        Grid::new(self.x0, self.x1, n, self.periodic, self.t0, self.t1, nt)
    }
}
