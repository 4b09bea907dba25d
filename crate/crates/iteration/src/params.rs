//! Stage parameter selection: every derived scale of one stage follows
//! from the declared levels `(Ξ, e_v, e_R)`, the oscillation count `N`,
//! and a handful of dimensionless tuning constants.

use fields_core::FrequencyEnergyLevels;
use serde::Serialize;

use crate::IterationError;

/// Dimensionless tuning constants of a stage.  All defaults are desk-scale
/// empirical values; each is exposed for sweeps.
#[derive(Debug, Clone)]
pub struct StageConfig {
    /// Frequency multiplier: `λ = B_λ N Ξ`.
    pub b_lambda: f64,
    /// Time-cutoff multiplier: `τ = b₀ b Ξ⁻¹ e_v^{-1/2}`.
    pub b0: f64,
    /// Space-cutoff multiplier: `ρ = c_ρ Ξ⁻¹`.
    pub c_rho: f64,
    /// Velocity mollification multiplier: `ε_v = a N^{-1/L} Ξ⁻¹`.
    pub a_moll: f64,
    /// Stress/energy mollification multiplier: `ε_x = c N^{-1/L} Ξ⁻¹`,
    /// `ε_t = c N⁻¹ Ξ⁻¹ e_R^{-1/2}`.
    pub c_moll: f64,
    /// Derivative order `L` of the declared levels and the kernel moments.
    pub moll_order: usize,
    /// Parametrix depth `D` for single-wave transport forces.
    pub depth: usize,
    /// Parametrix depth for wave-pair interaction forces.
    pub pair_depth: usize,
    /// Energy floor ratio: require `ẽ ≥ k_lower · e_R` near the stress.
    pub k_lower: f64,
    /// Frequency growth constant of the output levels: `Ξ₁ = C₀ N Ξ`.
    pub c_level: f64,
    /// Weight-ball radius multiplier for the remainder closure solves.
    pub rho_bar_factor: f64,
    /// Moment-gate slack handed to the divergence solver.
    pub moment_tol_factor: f64,
    /// Gauss–Legendre node count of the divergence solver.
    pub gl_nodes: usize,
    /// Wave-construction constants (drift ceiling, phase floor, …).
    pub wave: waves::WaveConfig,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            b_lambda: 4.0,
            b0: 0.5,
            c_rho: 0.5,
            a_moll: 0.5,
            c_moll: 0.5,
            moll_order: 2,
            depth: 3,
            pair_depth: 2,
            k_lower: 4.0,
            c_level: 4.0,
            rho_bar_factor: 1.2,
            moment_tol_factor: 100.0,
            gl_nodes: 24,
            wave: waves::WaveConfig::default(),
        }
    }
}

/// All derived scales of one stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageParameters {
    pub n: f64,
    /// `b = (e_v^{1/2} / (e_R^{1/2} N))^{1/2}`, the sharp-time-cutoff gain.
    pub b: f64,
    /// Natural advective time `θ = Ξ⁻¹ e_v^{-1/2}`.
    pub theta: f64,
    pub lambda: f64,
    pub tau: f64,
    pub rho: f64,
    pub eps_v: f64,
    pub eps_x: f64,
    pub eps_t: f64,
    /// Declared levels of the incoming state.
    pub xi: f64,
    pub e_v: f64,
    pub e_r: f64,
    /// Output levels `(C₀NΞ, e_R, b⁻¹ e_v^{1/2} e_R^{1/2} / N)`.
    pub xi_next: f64,
    pub e_v_next: f64,
    pub e_r_next: f64,
}

/// One row of the dimensional-consistency audit: exponents of length and
/// time carried by a derived quantity, against what its role demands.
#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub name: &'static str,
    /// (length, time) exponents derived from the defining formula, using
    /// [Ξ] = L⁻¹ and [e] = L²T⁻².
    pub derived: (f64, f64),
    /// (length, time) exponents the quantity must carry.
    pub expected: (f64, f64),
    pub consistent: bool,
}

fn audit_row(name: &'static str, derived: (f64, f64), expected: (f64, f64)) -> AuditEntry {
    AuditEntry {
        name,
        derived,
        expected,
        consistent: (derived.0 - expected.0).abs() < 1e-12 && (derived.1 - expected.1).abs() < 1e-12,
    }
}

impl StageParameters {
    /// Units audit of every derived scale.  Exponents are propagated from
    /// the defining formulas symbolically (the formulas are monomials in
    /// Ξ, e_v, e_R, so the exponent arithmetic is exact).
    pub fn dimensional_audit(&self) -> Vec<AuditEntry> {
        // A monomial Ξ^a e_v^b e_R^c N^d carries L^{-a+2b+2c} T^{-2b-2c}.
        let dims = |a: f64, b: f64, c: f64| (-a + 2.0 * (b + c), -2.0 * (b + c));
        vec![
            audit_row("theta", dims(-1.0, -0.5, 0.0), (0.0, 1.0)),
            audit_row("lambda", dims(1.0, 0.0, 0.0), (-1.0, 0.0)),
            audit_row("tau", dims(-1.0, -0.5, 0.0), (0.0, 1.0)),
            audit_row("rho", dims(-1.0, 0.0, 0.0), (1.0, 0.0)),
            audit_row("eps_v", dims(-1.0, 0.0, 0.0), (1.0, 0.0)),
            audit_row("eps_x", dims(-1.0, 0.0, 0.0), (1.0, 0.0)),
            audit_row("eps_t", dims(-1.0, 0.0, -0.5), (0.0, 1.0)),
            audit_row("b", dims(0.0, 0.25, -0.25), (0.0, 0.0)),
            audit_row("e_r_next", dims(0.0, 0.25, 0.75), (2.0, -2.0)),
        ]
    }
}

/// Derive every stage scale from the levels and the oscillation count.
///
/// `N` must clear the floor `(e_v/e_R)^{3/2}`; below it the sharp time
/// cutoffs cost more than the oscillation gains.
pub fn choose_parameters(
    levels: &FrequencyEnergyLevels,
    n: f64,
    cfg: &StageConfig,
) -> Result<StageParameters, IterationError> {
    levels
        .validate()
        .map_err(|e| IterationError::Levels(e.to_string()))?;
    let (xi, e_v, e_r) = (levels.xi, levels.e_v, levels.e_r);
    let min_n = (e_v / e_r).powf(1.5);
    if n < min_n * (1.0 - 1e-12) {
        return Err(IterationError::NTooSmall { n, min: min_n });
    }
    let b = (e_v.sqrt() / (e_r.sqrt() * n)).sqrt();
    let theta = 1.0 / (xi * e_v.sqrt());
    let inv_l = 1.0 / cfg.moll_order as f64;
    Ok(StageParameters {
        n,
        b,
        theta,
        lambda: cfg.b_lambda * n * xi,
        tau: cfg.b0 * b * theta,
        rho: cfg.c_rho / xi,
        eps_v: cfg.a_moll * n.powf(-inv_l) / xi,
        eps_x: cfg.c_moll * n.powf(-inv_l) / xi,
        eps_t: cfg.c_moll / (n * xi * e_r.sqrt()),
        xi,
        e_v,
        e_r,
        xi_next: cfg.c_level * n * xi,
        e_v_next: e_r,
        e_r_next: e_v.sqrt() * e_r.sqrt() / (b * n),
    })
}
