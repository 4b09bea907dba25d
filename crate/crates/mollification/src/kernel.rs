//! Compactly supported mollification kernels with vanishing moments.
//!
//! All kernels are built from the polynomial bump `(1 - u²)⁴` (radial in
//! 3-D).  Higher vanishing-moment orders are obtained by mixing in even
//! radial powers `u^{2i} (1 - u²)⁴` and solving a small linear system so
//! that the *discrete* moments — over the lattice offsets or quadrature
//! nodes the kernel will actually be applied with — vanish exactly.
//! Nonnegative kernels stay a pure bump and consequently cannot kill the
//! second moment; requesting both is an error.

use fields_core::Grid;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MollError {
    #[error("kernel scale {scale} under-resolved: needs at least {min} (2 grid cells)")]
    UnderResolved { scale: f64, min: f64 },
    #[error("nonnegative kernels cannot have vanishing moments of order {0} > 2")]
    NonnegativeMomentOrder(usize),
    #[error("operation requires nonnegative kernels, got a signed kernel")]
    SignedKernel,
    #[error("kernel moment system is singular")]
    SingularSystem,
    #[error("lattice kernel requires equal grid spacing on all axes")]
    AnisotropicGrid,
    #[error("{count} trajectories escaped the box; first at node (it={it}, ix={ix}, iy={iy}, iz={iz})")]
    Escape { count: usize, it: usize, ix: usize, iy: usize, iz: usize },
    #[error("field error: {0}")]
    Field(#[from] fields_core::FieldError),
}

/// How the kernel is discretized.
pub(crate) enum KernelSupport {
    /// Grid-lattice offsets (spatial convolution).
    Lattice(Vec<[i64; 3]>),
    /// Physical 1-D quadrature nodes (time axis of the flow mollifier).
    Time(Vec<f64>),
}

/// A sampled mollification kernel.  `weights` always sums to exactly 1 and
/// the discrete moments of degree `< moment_order` vanish to roundoff.
pub struct MollKernel {
    pub dim: u8,
    pub scale: f64,
    pub moment_order: usize,
    pub nonnegative: bool,
    pub(crate) support: KernelSupport,
    pub(crate) weights: Vec<f64>,
}

fn bump(u2: f64) -> f64 {
    if u2 >= 1.0 {
        0.0
    } else {
        (1.0 - u2).powi(4)
    }
}

/// Solve the square system `A c = b` by Gaussian elimination with partial
/// pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, MollError> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(MollError::SingularSystem);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

/// Even monomials (as sorted exponent triples) of total degree `< m`,
/// degree ≥ 2, deduplicated under coordinate exchange: the constraints a
/// radial profile on a symmetric node set must satisfy beyond unit mass.
fn even_monomials(m: usize, dim: u8) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    if dim == 1 {
        let mut d = 2;
        while d < m {
            out.push([d, 0, 0]);
            d += 2;
        }
        return out;
    }
    let mut seen = std::collections::BTreeSet::new();
    for a in (0..m).step_by(2) {
        for b in (0..m).step_by(2) {
            for c in (0..m).step_by(2) {
                let d = a + b + c;
                if d >= 2 && d < m {
                    let mut key = [a, b, c];
                    key.sort_unstable();
                    if seen.insert(key) {
                        out.push(key);
                    }
                }
            }
        }
    }
    out
}

/// Build weights: `w_j = q_j · Σ_i c_i u2_j^i bump(u2_j)` with coefficients
/// solved so that unit mass holds and the listed monomial moments vanish,
/// all with respect to the discrete sum over the given nodes.
fn solve_weights(
    nodes_unit: &[[f64; 3]],
    base_quad: &[f64],
    monomials: &[[usize; 3]],
    nonnegative: bool,
    moment_order: usize,
) -> Result<Vec<f64>, MollError> {
    if nonnegative && moment_order > 2 {
        return Err(MollError::NonnegativeMomentOrder(moment_order));
    }
    let nbasis = if nonnegative { 1 } else { 1 + monomials.len() };
    // Row 0: unit mass.  Rows 1..: vanishing monomial moments.
    let mut a = vec![vec![0.0; nbasis]; nbasis.max(1)];
    let mut b = vec![0.0; nbasis.max(1)];
    b[0] = 1.0;
    for (j, p) in nodes_unit.iter().enumerate() {
        let u2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let base = base_quad[j] * bump(u2);
        for i in 0..nbasis {
            let basis = base * u2.powi(i as i32);
            a[0][i] += basis;
            for (r, mono) in monomials.iter().enumerate().take(nbasis.saturating_sub(1)) {
                a[r + 1][i] +=
                    basis * p[0].powi(mono[0] as i32) * p[1].powi(mono[1] as i32)
                        * p[2].powi(mono[2] as i32);
            }
        }
    }
    let c = solve_dense(a, b)?;
    let weights: Vec<f64> = nodes_unit
        .iter()
        .zip(base_quad)
        .map(|(p, q)| {
            let u2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            let base = q * bump(u2);
            (0..c.len()).map(|i| c[i] * base * u2.powi(i as i32)).sum()
        })
        .collect();
    Ok(weights)
}

impl MollKernel {
    /// 3-D kernel sampled on the grid lattice within radius `scale`, for
    /// spatial convolution.  Requires `scale ≥ 2` cells and cubic cells.
    pub fn lattice_space(
        grid: &Grid,
        scale: f64,
        moment_order: usize,
        nonnegative: bool,
    ) -> Result<Self, MollError> {
        let h = grid.dx(0);
        if (grid.dx(1) - h).abs() > 1e-12 * h || (grid.dx(2) - h).abs() > 1e-12 * h {
            return Err(MollError::AnisotropicGrid);
        }
        if scale < 2.0 * h {
            return Err(MollError::UnderResolved { scale, min: 2.0 * h });
        }
        let span = (scale / h).ceil() as i64;
        let mut offsets = Vec::new();
        let mut nodes_unit = Vec::new();
        for dz in -span..=span {
            for dy in -span..=span {
                for dx in -span..=span {
                    let u = [
                        dx as f64 * h / scale,
                        dy as f64 * h / scale,
                        dz as f64 * h / scale,
                    ];
                    if u[0] * u[0] + u[1] * u[1] + u[2] * u[2] < 1.0 {
                        offsets.push([dx, dy, dz]);
                        nodes_unit.push(u);
                    }
                }
            }
        }
        let quad = vec![1.0; nodes_unit.len()];
        let monomials = even_monomials(moment_order, 3);
        let weights = solve_weights(&nodes_unit, &quad, &monomials, nonnegative, moment_order)?;
        Ok(MollKernel {
            dim: 3,
            scale,
            moment_order,
            nonnegative,
            support: KernelSupport::Lattice(offsets),
            weights,
        })
    }

    /// 1-D kernel on 9 trapezoid nodes over `[-scale, scale]`, for the
    /// time axis of mollification along the flow.
    pub fn quad_time(scale: f64, moment_order: usize, nonnegative: bool) -> Result<Self, MollError> {
        const N: usize = 9;
        let mut nodes_unit = Vec::with_capacity(N);
        let mut quad = Vec::with_capacity(N);
        for j in 0..N {
            let u = -1.0 + 2.0 * j as f64 / (N - 1) as f64;
            nodes_unit.push([u, 0.0, 0.0]);
            quad.push(if j == 0 || j == N - 1 { 0.5 } else { 1.0 });
        }
        let monomials = even_monomials(moment_order, 1);
        let weights = solve_weights(&nodes_unit, &quad, &monomials, nonnegative, moment_order)?;
        let nodes = nodes_unit.iter().map(|u| u[0] * scale).collect();
        Ok(MollKernel {
            dim: 1,
            scale,
            moment_order,
            nonnegative,
            support: KernelSupport::Time(nodes),
            weights,
        })
    }

    /// Discrete moment `Σ w_j · node_j^a` (offsets in physical units).
    /// The grid spacing is needed to convert lattice offsets.
    pub fn moment(&self, a: [usize; 3], h: f64) -> f64 {
        match &self.support {
            KernelSupport::Lattice(offs) => offs
                .iter()
                .zip(&self.weights)
                .map(|(o, w)| {
                    w * (o[0] as f64 * h).powi(a[0] as i32)
                        * (o[1] as f64 * h).powi(a[1] as i32)
                        * (o[2] as f64 * h).powi(a[2] as i32)
                })
                .sum(),
            KernelSupport::Time(nodes) => nodes
                .iter()
                .zip(&self.weights)
                .map(|(s, w)| w * s.powi(a[0] as i32))
                .sum(),
        }
    }

    /// Quadrature weights (lattice offsets or time nodes, in order).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Time-kernel nodes in physical units (None for lattice kernels).
    pub fn time_nodes(&self) -> Option<&[f64]> {
        match &self.support {
            KernelSupport::Time(n) => Some(n),
            KernelSupport::Lattice(_) => None,
        }
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_nonnegative_sampled(&self) -> bool {
        self.weights.iter().all(|w| *w >= -1e-15)
    }
}
