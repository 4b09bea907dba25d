use crate::grid::Grid;
use crate::FieldError;
use rayon::prelude::*;
use std::sync::Arc;

/// Shared storage/indexing behind every sampled field: `ncomp` interleaved
/// components per node, node order `(t, z, y, x)`.
#[derive(Clone)]
pub struct RawField {
    grid: Arc<Grid>,
    ncomp: usize,
    pub data: Vec<f64>,
}

impl RawField {
    fn zeros(grid: &Arc<Grid>, ncomp: usize) -> Self {
        RawField {
            grid: grid.clone(),
            ncomp,
            data: vec![0.0; grid.node_count() * ncomp],
        }
    }

    #[inline]
    pub fn at(&self, it: usize, ix: usize, iy: usize, iz: usize, c: usize) -> f64 {
        self.data[self.grid.idx(it, ix, iy, iz) * self.ncomp + c]
    }

    #[inline]
    pub fn at_mut(&mut self, it: usize, ix: usize, iy: usize, iz: usize, c: usize) -> &mut f64 {
        let i = self.grid.idx(it, ix, iy, iz) * self.ncomp + c;
        &mut self.data[i]
    }

    fn validate(&self) -> Result<(), FieldError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(FieldError::NonFinite(i)),
            None => Ok(()),
        }
    }

    fn sup_norm(&self) -> f64 {
        self.data
            .par_iter()
            .map(|v| v.abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Trilinear-in-space, linear-in-time sample at an arbitrary point.
    /// Out-of-box points on bounded axes clamp to the boundary value.
    fn sample(&self, t: f64, x: [f64; 3], c: usize, out: &mut [f64]) {
        let g = &self.grid;
        let xw = g.wrap(x);
        let mut i0 = [0usize; 3];
        let mut i1 = [0usize; 3];
        let mut fr = [0.0f64; 3];
        for a in 0..3 {
            let u = (xw[a] - g.x0[a]) / g.dx(a);
            let n = g.n[a];
            if g.periodic[a] {
                let uf = u.floor();
                let i = (uf as i64).rem_euclid(n as i64) as usize;
                i0[a] = i;
                i1[a] = (i + 1) % n;
                fr[a] = u - uf;
            } else {
                let uc = u.clamp(0.0, (n - 1) as f64);
                let i = (uc.floor() as usize).min(n - 2);
                i0[a] = i;
                i1[a] = i + 1;
                fr[a] = uc - i as f64;
            }
        }
        let tu = ((t - g.t0) / g.dt()).clamp(0.0, (g.nt - 1) as f64);
        let it0 = (tu.floor() as usize).min(g.nt - 2);
        let ft = tu - it0 as f64;

        for (k, o) in out.iter_mut().enumerate() {
            let comp = c + k;
            let mut acc = [0.0f64; 2];
            for (sl, accs) in [(it0, 0usize), (it0 + 1, 1)] {
                let mut v = 0.0;
                for (wz, iz) in [((1.0 - fr[2]), i0[2]), (fr[2], i1[2])] {
                    for (wy, iy) in [((1.0 - fr[1]), i0[1]), (fr[1], i1[1])] {
                        for (wx, ix) in [((1.0 - fr[0]), i0[0]), (fr[0], i1[0])] {
                            v += wz * wy * wx * self.at(sl, ix, iy, iz, comp);
                        }
                    }
                }
                acc[accs] = v;
            }
            *o = (1.0 - ft) * acc[0] + ft * acc[1];
        }
    }
}

macro_rules! field_common {
    ($name:ident, $ncomp:expr) => {
        impl $name {
            pub fn zeros(grid: &Arc<Grid>) -> Self {
                $name(RawField::zeros(grid, $ncomp))
            }

            pub fn grid(&self) -> &Arc<Grid> {
                &self.0.grid
            }

            pub fn data(&self) -> &[f64] {
                &self.0.data
            }

            pub fn data_mut(&mut self) -> &mut [f64] {
                &mut self.0.data
            }

            pub fn validate(&self) -> Result<(), FieldError> {
                self.0.validate()
            }

            pub fn sup_norm(&self) -> f64 {
                self.0.sup_norm()
            }

            /// Quadrature-weighted L2 norm over space-time (dt-weighted sum of
            /// per-slice spatial L2^2).
            pub fn l2_norm(&self) -> f64 {
                let g = self.0.grid.clone();
                let slice = g.slice_len() * $ncomp;
                let total: f64 = (0..g.nt)
                    .into_par_iter()
                    .map(|it| {
                        let mut acc = 0.0;
                        for s in 0..g.slice_len() {
                            let w = g.quad_weight(s);
                            for c in 0..$ncomp {
                                let v = self.0.data[it * slice + s * $ncomp + c];
                                acc += w * v * v;
                            }
                        }
                        let wt = if it == 0 || it == g.nt - 1 { 0.5 } else { 1.0 };
                        acc * wt * g.dt()
                    })
                    .sum();
                total.sqrt()
            }

            pub fn scale(&mut self, a: f64) {
                self.0.data.par_iter_mut().for_each(|v| *v *= a);
            }

            /// `self += a * other` (same grid).
            pub fn axpy(&mut self, a: f64, other: &Self) {
                assert_eq!(self.0.grid.as_ref(), other.0.grid.as_ref());
                self.0
                    .data
                    .par_iter_mut()
                    .zip(other.0.data.par_iter())
                    .for_each(|(x, y)| *x += a * y);
            }
        }
    };
}

/// Scalar samples, one per node.
#[derive(Clone)]
pub struct ScalarField(pub(crate) RawField);
field_common!(ScalarField, 1);

impl ScalarField {
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, [f64; 3]) -> f64 + Sync) -> Self {
        let mut out = ScalarField::zeros(grid);
        let g = grid.clone();
        let slice = g.slice_len();
        out.0
            .data
            .par_chunks_mut(slice)
            .enumerate()
            .for_each(|(it, chunk)| {
                let t = g.t(it);
                for (s, v) in chunk.iter_mut().enumerate() {
                    *v = f(t, g.node_pos(s));
                }
            });
        out
    }

    #[inline]
    pub fn at(&self, it: usize, ix: usize, iy: usize, iz: usize) -> f64 {
        self.0.at(it, ix, iy, iz, 0)
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, iy: usize, iz: usize, v: f64) {
        *self.0.at_mut(it, ix, iy, iz, 0) = v;
    }

    pub fn sample(&self, t: f64, x: [f64; 3]) -> f64 {
        let mut out = [0.0];
        self.0.sample(t, x, 0, &mut out);
        out[0]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let mut out = self.clone();
        out.0.data.par_iter_mut().for_each(|v| *v = f(*v));
        out
    }
}

/// Three interleaved components per node.
#[derive(Clone)]
pub struct VectorField(pub(crate) RawField);
field_common!(VectorField, 3);

impl VectorField {
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, [f64; 3]) -> [f64; 3] + Sync) -> Self {
        let mut out = VectorField::zeros(grid);
        let g = grid.clone();
        let slice = g.slice_len() * 3;
        out.0
            .data
            .par_chunks_mut(slice)
            .enumerate()
            .for_each(|(it, chunk)| {
                let t = g.t(it);
                for s in 0..g.slice_len() {
                    let v = f(t, g.node_pos(s));
                    chunk[s * 3] = v[0];
                    chunk[s * 3 + 1] = v[1];
                    chunk[s * 3 + 2] = v[2];
                }
            });
        out
    }

    #[inline]
    pub fn at(&self, it: usize, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        [
            self.0.at(it, ix, iy, iz, 0),
            self.0.at(it, ix, iy, iz, 1),
            self.0.at(it, ix, iy, iz, 2),
        ]
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, iy: usize, iz: usize, v: [f64; 3]) {
        for c in 0..3 {
            *self.0.at_mut(it, ix, iy, iz, c) = v[c];
        }
    }

    pub fn sample(&self, t: f64, x: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        self.0.sample(t, x, 0, &mut out);
        out
    }

    pub fn component(&self, c: usize) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        out.0
            .data
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = self.0.data[i * 3 + c]);
        out
    }

    pub fn from_components(fx: &ScalarField, fy: &ScalarField, fz: &ScalarField) -> Self {
        let mut out = VectorField::zeros(fx.grid());
        out.0.data.par_iter_mut().enumerate().for_each(|(i, v)| {
            let (node, c) = (i / 3, i % 3);
            *v = match c {
                0 => fx.0.data[node],
                1 => fy.0.data[node],
                _ => fz.0.data[node],
            };
        });
        out
    }
}

/// Symmetric 3x3 tensor field: 6 stored components in the order
/// `[xx, xy, xz, yy, yz, zz]`; the `(j,l)` accessor resolves symmetry.
#[derive(Clone)]
pub struct SymmetricTensorField(pub(crate) RawField);
field_common!(SymmetricTensorField, 6);

pub const SYM_INDEX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

impl SymmetricTensorField {
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, [f64; 3]) -> [f64; 6] + Sync) -> Self {
        let mut out = SymmetricTensorField::zeros(grid);
        let g = grid.clone();
        let slice = g.slice_len() * 6;
        out.0
            .data
            .par_chunks_mut(slice)
            .enumerate()
            .for_each(|(it, chunk)| {
                let t = g.t(it);
                for s in 0..g.slice_len() {
                    let v = f(t, g.node_pos(s));
                    chunk[s * 6..s * 6 + 6].copy_from_slice(&v);
                }
            });
        out
    }

    #[inline]
    pub fn comp(&self, it: usize, ix: usize, iy: usize, iz: usize, j: usize, l: usize) -> f64 {
        self.0.at(it, ix, iy, iz, SYM_INDEX[j][l])
    }

    #[inline]
    pub fn at6(&self, it: usize, ix: usize, iy: usize, iz: usize) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.0.at(it, ix, iy, iz, c);
        }
        out
    }

    #[inline]
    pub fn set6(&mut self, it: usize, ix: usize, iy: usize, iz: usize, v: [f64; 6]) {
        for c in 0..6 {
            *self.0.at_mut(it, ix, iy, iz, c) = v[c];
        }
    }

    /// One stored component as a scalar field.
    pub fn component(&self, c: usize) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        out.0
            .data
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = self.0.data[i * 6 + c]);
        out
    }

    pub fn set_component(&mut self, c: usize, f: &ScalarField) {
        self.0
            .data
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, v)| {
                if i % 6 == c {
                    *v = f.0.data[i / 6];
                }
            });
    }

    pub fn trace(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid());
        out.0.data.par_iter_mut().enumerate().for_each(|(i, v)| {
            *v = self.0.data[i * 6] + self.0.data[i * 6 + 3] + self.0.data[i * 6 + 5];
        });
        out
    }
}

/// Complex vector field stored as paired real fields.
#[derive(Clone)]
pub struct ComplexVectorField {
    pub re: VectorField,
    pub im: VectorField,
}

impl ComplexVectorField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ComplexVectorField {
            re: VectorField::zeros(grid),
            im: VectorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.re.grid()
    }

    pub fn sup_norm(&self) -> f64 {
        let re = &self.re.0.data;
        let im = &self.im.0.data;
        (0..re.len())
            .into_par_iter()
            .map(|i| re[i] * re[i] + im[i] * im[i])
            .reduce(|| 0.0, f64::max)
            .sqrt()
    }

    pub fn axpy(&mut self, re: f64, im: f64, other: &Self) {
        // (self) += (re + i im) * other, componentwise complex multiply.
        let n = self.re.0.data.len();
        let (sre, sim) = (&mut self.re.0.data, &mut self.im.0.data);
        sre.par_iter_mut()
            .zip(sim.par_iter_mut())
            .zip(other.re.0.data.par_iter().zip(other.im.0.data.par_iter()))
            .take(n)
            .for_each(|((a, b), (c, d))| {
                *a += re * c - im * d;
                *b += re * d + im * c;
            });
    }
}
