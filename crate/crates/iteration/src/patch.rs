//! Dense fields restricted to a space-time box.
//!
//! A stage at moderate resolution carries hundreds of waves whose fields
//! vanish outside one lattice cell's cylinder; storing them on the full
//! grid would exhaust memory.  A patch is the bounding box of a wave's
//! support plus a stencil margin, with values outside the box treated as
//! exactly zero — which they are, by construction, whenever the margin
//! covers the derivative stencils applied to the patch.

use fields_core::{Grid, ScalarField, VectorField};

/// Inclusive space-time index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchBox {
    pub t0: usize,
    pub t1: usize,
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl PatchBox {
    pub fn nt(&self) -> usize {
        self.t1 - self.t0 + 1
    }

    pub fn shape(&self) -> [usize; 3] {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn len(&self) -> usize {
        let s = self.shape();
        self.nt() * s[0] * s[1] * s[2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, it: usize, ix: usize, iy: usize, iz: usize) -> bool {
        it >= self.t0
            && it <= self.t1
            && ix >= self.lo[0]
            && ix <= self.hi[0]
            && iy >= self.lo[1]
            && iy <= self.hi[1]
            && iz >= self.lo[2]
            && iz <= self.hi[2]
    }

    pub fn intersect(&self, other: &PatchBox) -> Option<PatchBox> {
        let t0 = self.t0.max(other.t0);
        let t1 = self.t1.min(other.t1);
        if t0 > t1 {
            return None;
        }
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            lo[a] = self.lo[a].max(other.lo[a]);
            hi[a] = self.hi[a].min(other.hi[a]);
            if lo[a] > hi[a] {
                return None;
            }
        }
        Some(PatchBox { t0, t1, lo, hi })
    }

    /// Grow spatially by `m` cells, clamped to the grid.
    pub fn grown(&self, m: usize, g: &Grid) -> PatchBox {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for a in 0..3 {
            lo[a] = lo[a].saturating_sub(m);
            hi[a] = (hi[a] + m).min(g.n[a] - 1);
        }
        PatchBox {
            t0: self.t0,
            t1: self.t1,
            lo,
            hi,
        }
    }
}

/// Real dense field with `C` components per node, on a patch box.
#[derive(Debug, Clone)]
pub struct RPatch<const C: usize> {
    pub bx: PatchBox,
    pub data: Vec<f64>,
}

impl<const C: usize> RPatch<C> {
    pub fn zeros(bx: PatchBox) -> Self {
        RPatch {
            data: vec![0.0; bx.len() * C],
            bx,
        }
    }

    #[inline]
    fn offset(&self, it: usize, ix: usize, iy: usize, iz: usize) -> usize {
        let s = self.bx.shape();
        let (dt, dx, dy, dz) = (
            it - self.bx.t0,
            ix - self.bx.lo[0],
            iy - self.bx.lo[1],
            iz - self.bx.lo[2],
        );
        (((dt * s[2] + dz) * s[1] + dy) * s[0] + dx) * C
    }

    /// Component values at a node; zero outside the box.
    #[inline]
    pub fn get(&self, it: usize, ix: usize, iy: usize, iz: usize) -> [f64; C] {
        if !self.bx.contains(it, ix, iy, iz) {
            return [0.0; C];
        }
        let o = self.offset(it, ix, iy, iz);
        let mut v = [0.0; C];
        v.copy_from_slice(&self.data[o..o + C]);
        v
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, iy: usize, iz: usize, v: [f64; C]) {
        let o = self.offset(it, ix, iy, iz);
        self.data[o..o + C].copy_from_slice(&v);
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    /// 4th-order central spatial derivative along `axis`, with the zero
    /// extension beyond the box (exact when the margin holds the support).
    pub fn deriv_axis(&self, axis: usize, h: f64) -> RPatch<C> {
        let bx = self.bx;
        let mut out = RPatch::zeros(bx);
        let inv = 1.0 / (12.0 * h);
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        let at = |d: i64| -> [f64; C] {
                            let mut p = [ix as i64, iy as i64, iz as i64];
                            p[axis] += d;
                            if p[axis] < 0 {
                                return [0.0; C];
                            }
                            self.get(it, p[0] as usize, p[1] as usize, p[2] as usize)
                        };
                        let (m2, m1, p1, p2) = (at(-2), at(-1), at(1), at(2));
                        let mut v = [0.0; C];
                        for c in 0..C {
                            v[c] = (m2[c] - 8.0 * m1[c] + 8.0 * p1[c] - p2[c]) * inv;
                        }
                        out.set(it, ix, iy, iz, v);
                    }
                }
            }
        }
        out
    }

    /// 2nd-order time derivative: central inside, one-sided at the box
    /// time edges (the same schemes the full-grid operator uses at the
    /// grid ends).
    pub fn deriv_time(&self, dt: f64) -> RPatch<C> {
        let bx = self.bx;
        let mut out = RPatch::zeros(bx);
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        let f = |t: usize| self.get(t, ix, iy, iz);
                        let mut v = [0.0; C];
                        if it == bx.t0 && it == bx.t1 {
                            // single slice: no time variation representable
                        } else if it == bx.t0 {
                            let (f0, f1) = (f(it), f(it + 1));
                            if it + 2 <= bx.t1 {
                                let f2 = f(it + 2);
                                for c in 0..C {
                                    v[c] = (-3.0 * f0[c] + 4.0 * f1[c] - f2[c]) / (2.0 * dt);
                                }
                            } else {
                                for c in 0..C {
                                    v[c] = (f1[c] - f0[c]) / dt;
                                }
                            }
                        } else if it == bx.t1 {
                            let (f0, f1) = (f(it), f(it - 1));
                            if it >= bx.t0 + 2 {
                                let f2 = f(it - 2);
                                for c in 0..C {
                                    v[c] = (3.0 * f0[c] - 4.0 * f1[c] + f2[c]) / (2.0 * dt);
                                }
                            } else {
                                for c in 0..C {
                                    v[c] = (f0[c] - f1[c]) / dt;
                                }
                            }
                        } else {
                            let (m1, p1) = (f(it - 1), f(it + 1));
                            for c in 0..C {
                                v[c] = (p1[c] - m1[c]) / (2.0 * dt);
                            }
                        }
                        out.set(it, ix, iy, iz, v);
                    }
                }
            }
        }
        out
    }

    /// Restriction of a full-grid scalar (C = 1) to a box.
    pub fn from_scalar(f: &ScalarField, bx: PatchBox) -> RPatch<1> {
        let mut out = RPatch::<1>::zeros(bx);
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        out.set(it, ix, iy, iz, [f.at(it, ix, iy, iz)]);
                    }
                }
            }
        }
        out
    }

    /// Restriction of a full-grid vector (C = 3) to a box.
    pub fn from_vector(f: &VectorField, bx: PatchBox) -> RPatch<3> {
        let mut out = RPatch::<3>::zeros(bx);
        for it in bx.t0..=bx.t1 {
            for iz in bx.lo[2]..=bx.hi[2] {
                for iy in bx.lo[1]..=bx.hi[1] {
                    for ix in bx.lo[0]..=bx.hi[0] {
                        out.set(it, ix, iy, iz, f.at(it, ix, iy, iz));
                    }
                }
            }
        }
        out
    }
}

/// Complex dense field on a patch box.
#[derive(Debug, Clone)]
pub struct CPatch<const C: usize> {
    pub re: RPatch<C>,
    pub im: RPatch<C>,
}

impl<const C: usize> CPatch<C> {
    pub fn zeros(bx: PatchBox) -> Self {
        CPatch {
            re: RPatch::zeros(bx),
            im: RPatch::zeros(bx),
        }
    }

    pub fn bx(&self) -> PatchBox {
        self.re.bx
    }

    #[inline]
    pub fn get(&self, it: usize, ix: usize, iy: usize, iz: usize) -> ([f64; C], [f64; C]) {
        (self.re.get(it, ix, iy, iz), self.im.get(it, ix, iy, iz))
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, iy: usize, iz: usize, re: [f64; C], im: [f64; C]) {
        self.re.set(it, ix, iy, iz, re);
        self.im.set(it, ix, iy, iz, im);
    }

    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for (r, i) in self.re.data.iter().zip(&self.im.data) {
            m = m.max((r * r + i * i).sqrt());
        }
        m
    }

    /// Restriction of a full-grid complex vector (C = 3) to a box.
    pub fn from_fields(
        re: &VectorField,
        im: &VectorField,
        bx: PatchBox,
    ) -> CPatch<3> {
        CPatch {
            re: RPatch::<3>::from_vector(re, bx),
            im: RPatch::<3>::from_vector(im, bx),
        }
    }
}

/// `∂_j q^{jl}` of a complex symmetric tensor patch (components packed
/// `xx, xy, xz, yy, yz, zz`), spatial derivatives only.
pub fn sym_div_patch(q: &CPatch<6>, h: [f64; 3]) -> CPatch<3> {
    // SYM_INDEX[j][l] packing of the 3x3 symmetric matrix.
    const SYM: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    let bx = q.bx();
    let mut out = CPatch::<3>::zeros(bx);
    for j in 0..3 {
        let dre = q.re.deriv_axis(j, h[j]);
        let dim = q.im.deriv_axis(j, h[j]);
        for (n, (or, oi)) in out
            .re
            .data
            .chunks_mut(3)
            .zip(out.im.data.chunks_mut(3))
            .enumerate()
            .map(|(n, p)| (n, p))
        {
            for l in 0..3 {
                or[l] += dre.data[n * 6 + SYM[j][l]];
                oi[l] += dim.data[n * 6 + SYM[j][l]];
            }
        }
    }
    out
}

/// Spatial curl of a complex vector patch.
pub fn curl_patch(v: &CPatch<3>, h: [f64; 3]) -> CPatch<3> {
    let bx = v.bx();
    let dx_re = v.re.deriv_axis(0, h[0]);
    let dy_re = v.re.deriv_axis(1, h[1]);
    let dz_re = v.re.deriv_axis(2, h[2]);
    let dx_im = v.im.deriv_axis(0, h[0]);
    let dy_im = v.im.deriv_axis(1, h[1]);
    let dz_im = v.im.deriv_axis(2, h[2]);
    let mut out = CPatch::<3>::zeros(bx);
    let n = bx.len();
    for i in 0..n {
        let (o, p) = (i * 3, i * 3);
        out.re.data[o] = dy_re.data[p + 2] - dz_re.data[p + 1];
        out.re.data[o + 1] = dz_re.data[p] - dx_re.data[p + 2];
        out.re.data[o + 2] = dx_re.data[p + 1] - dy_re.data[p];
        out.im.data[o] = dy_im.data[p + 2] - dz_im.data[p + 1];
        out.im.data[o + 1] = dz_im.data[p] - dx_im.data[p + 2];
        out.im.data[o + 2] = dx_im.data[p + 1] - dy_im.data[p];
    }
    out
}
