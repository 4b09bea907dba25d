//! Diagnostic verification of the flow-map and cylinder estimates.
//!
//! Each verifier measures a quantity for which a closed-form envelope is
//! known (Gronwall separation bounds, cylinder containments, comparison of
//! the cylinders of two velocity fields, agreement of Lagrangian
//! neighborhoods for fields that coincide outside a set) and reports
//! pass/fail with margins.  Reports serialize to JSON.

use crate::cylinder::{
    eulerian_contains, lagrangian_contains, lagrangian_set_contains, EulerianCylinder,
    LagrangianCylinder, Point, SpaceTimeMask,
};
use crate::flow::FlowMap;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of one Gronwall separation check: the measured distance between
/// the trajectories through `x0` and `x0+h` after time `s`, against the
/// envelopes `|h| e^{∓|s| ‖∇v‖}`.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub s: f64,
    pub h: [f64; 3],
    pub grad_norm: f64,
    pub measured: f64,
    pub lower: f64,
    pub upper: f64,
    /// Inside the envelopes inflated by the relative slack.
    pub pass: bool,
    /// False when a trajectory escaped the box.
    pub conclusive: bool,
}

/// Measure the trajectory separation through `x0` and `x0 + h` over time
/// `s` and compare against the Gronwall envelopes for the Lipschitz
/// constant `grad_norm` (pass a measured or analytic sup of `|∇v|`).
/// `slack` is the relative envelope inflation absorbing integrator and
/// interpolation error.
pub fn verify_flow_separation(
    map: &FlowMap,
    grad_norm: f64,
    t0: f64,
    x0: [f64; 3],
    h: [f64; 3],
    s: f64,
    slack: f64,
) -> SeparationReport {
    let hn = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let lower = hn * (-s.abs() * grad_norm).exp();
    let upper = hn * (s.abs() * grad_norm).exp();
    let x1 = [x0[0] + h[0], x0[1] + h[1], x0[2] + h[2]];
    let (a, b) = match (map.flow_spatial(t0, x0, s), map.flow_spatial(t0, x1, s)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            return SeparationReport {
                s,
                h,
                grad_norm,
                measured: f64::NAN,
                lower,
                upper,
                pass: false,
                conclusive: false,
            }
        }
    };
    let measured = map.grid().distance(a, b);
    let pass = measured >= lower * (1.0 - slack) && measured <= upper * (1.0 + slack);
    SeparationReport { s, h, grad_norm, measured, lower, upper, pass, conclusive: true }
}

/// One sampled containment failure.
#[derive(Debug, Clone, Serialize)]
pub struct ContainmentFailure {
    pub point: (f64, [f64; 3]),
    pub margin: f64,
}

/// Result of sampling one containment statement.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub samples: usize,
    pub failures: Vec<ContainmentFailure>,
    /// Smallest slack (rhs radius minus measured distance, in units of the
    /// rhs radius) seen over the sample; negative means a failure.
    pub min_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CylinderLemmaReport {
    pub checks: Vec<LemmaCheck>,
    pub pass: bool,
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    map: &'a FlowMap,
}

impl<'a> Sampler<'a> {
    fn unit_ball(&mut self) -> [f64; 3] {
        loop {
            let p = [
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
                self.rng.gen_range(-1.0..1.0),
            ];
            if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= 1.0 {
                return p;
            }
        }
    }

    /// A point of `Ĉ(τ,ρ;p)` drawn from the definition, or None on escape.
    fn in_eulerian(&mut self, p: Point, tau: f64, rho: f64) -> Option<Point> {
        let s = self.rng.gen_range(-tau..tau);
        let h = self.unit_ball().map(|c| c * rho);
        let (t, y) = self.map.flow(p.0, p.1, s).ok()?;
        Some((t, [y[0] + h[0], y[1] + h[1], y[2] + h[2]]))
    }

    /// A point of `Γ̂(τ,ρ;p)` drawn from the definition.
    fn in_lagrangian(&mut self, p: Point, tau: f64, rho: f64) -> Option<Point> {
        let s = self.rng.gen_range(-tau..tau);
        let h = self.unit_ball().map(|c| c * rho);
        self.map.flow(p.0, [p.1[0] + h[0], p.1[1] + h[1], p.1[2] + h[2]], s).ok()
    }
}

/// Distance-based margin of `q` relative to an Eulerian cylinder: positive
/// inside.  None when the query is out of reach (escape / time window).
fn eulerian_margin(c: &EulerianCylinder, q: Point) -> Option<f64> {
    let s = q.0 - c.center.0;
    if s.abs() > c.tau {
        return None;
    }
    let y = c.flow.flow_spatial(c.center.0, c.center.1, s).ok()?;
    Some((c.rho - c.flow.grid().distance(y, q.1)) / c.rho)
}

/// Sample-based verification of the cylinder lemmas for the flow of `v`
/// (and, when `other` is given, the comparison lemma against the flow of
/// `u`).  `center` should sit well inside the box; `tau0/tau1/rho0/rho1`
/// are the two duration/radius pairs entering the nested containments.
/// `slack` inflates every right-hand radius to absorb integrator error.
#[allow(clippy::too_many_arguments)]
pub fn verify_cylinder_lemmas(
    map: &FlowMap,
    other: Option<(&FlowMap, f64)>,
    center: Point,
    tau0: f64,
    tau1: f64,
    rho0: f64,
    rho1: f64,
    grad_norm: f64,
    samples: usize,
    slack: f64,
    seed: u64,
) -> CylinderLemmaReport {
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(seed), map };
    let infl = 1.0 + slack;
    let mut checks = Vec::new();

    // Duality: q ∈ Ĉ(τ,ρ;p) ⇔ p ∈ Γ̂(τ,ρ;q), as exact predicate equivalence.
    {
        let mut fails = Vec::new();
        let mut n = 0;
        for _ in 0..samples {
            let q = match s.in_eulerian(center, tau0, 2.0 * rho0) {
                Some(q) => q,
                None => continue,
            };
            n += 1;
            let lhs = eulerian_contains(
                &EulerianCylinder { flow: map, tau: tau0, rho: rho0, center },
                q,
            );
            let rhs = lagrangian_contains(
                &LagrangianCylinder { flow: map, tau: tau0, rho: rho0, center: q },
                center,
            );
            if lhs != rhs {
                fails.push(ContainmentFailure { point: q, margin: 0.0 });
            }
        }
        checks.push(LemmaCheck {
            lemma: "eulerian-lagrangian duality".into(),
            samples: n,
            min_margin: if fails.is_empty() { 0.0 } else { -1.0 },
            pass: fails.is_empty(),
            failures: fails,
        });
    }

    // Equivalence: Γ̂(τ, e^{-τ‖∇v‖}ρ; p) ⊆ Ĉ(τ,ρ;p) ⊆ Γ̂(τ, e^{τ‖∇v‖}ρ; p).
    {
        let gn = grad_norm;
        let shrink = (-tau0 * gn).exp();
        let grow = (tau0 * gn).exp();
        let mut fails = Vec::new();
        let mut n = 0;
        let mut min_margin = f64::INFINITY;
        for _ in 0..samples {
            if let Some(q) = s.in_lagrangian(center, tau0, shrink * rho0) {
                n += 1;
                match eulerian_margin(
                    &EulerianCylinder { flow: map, tau: tau0, rho: infl * rho0, center },
                    q,
                ) {
                    Some(m) => {
                        min_margin = min_margin.min(m);
                        if m < 0.0 {
                            fails.push(ContainmentFailure { point: q, margin: m });
                        }
                    }
                    None => fails.push(ContainmentFailure { point: q, margin: -1.0 }),
                }
            }
            if let Some(q) = s.in_eulerian(center, tau0, rho0) {
                n += 1;
                let c = LagrangianCylinder {
                    flow: map,
                    tau: tau0,
                    rho: infl * grow * rho0,
                    center,
                };
                if !lagrangian_contains(&c, q) {
                    fails.push(ContainmentFailure { point: q, margin: -1.0 });
                }
            }
        }
        checks.push(LemmaCheck {
            lemma: "eulerian-lagrangian equivalence".into(),
            samples: n,
            min_margin,
            pass: fails.is_empty(),
            failures: fails,
        });
    }

    // Nested containments.  Sample the left sets by composing definitions.
    {
        let gn = grad_norm;
        type Draw<'b> = Box<dyn FnMut(&mut Sampler) -> Option<Point> + 'b>;
        let mk_inner_eul =
            |s: &mut Sampler| -> Option<Point> { s.in_eulerian(center, tau0, rho0) };
        let mk_inner_lag =
            |s: &mut Sampler| -> Option<Point> { s.in_lagrangian(center, tau0, rho0) };
        let cases: Vec<(String, Draw, bool, f64, f64)> = vec![
            (
                // Ĉ(τ₁,ρ₁; Ĉ(τ₀,ρ₀;p)) ⊆ Ĉ(τ₀+τ₁, ρ₁ + e^{‖∇v‖τ₁}ρ₀; p)
                "eulerian of eulerian".into(),
                Box::new(move |s: &mut Sampler| {
                    let inner = mk_inner_eul(s)?;
                    s.in_eulerian(inner, tau1, rho1)
                }),
                true,
                tau0 + tau1,
                rho1 + (gn * tau1).exp() * rho0,
            ),
            (
                // Ĉ(τ₁,ρ₁; Γ̂(τ₀,ρ₀;p)) ⊆ Ĉ(τ₀+τ₁, ρ₁ + e^{‖∇v‖(τ₀+τ₁)}ρ₀; p)
                "eulerian of lagrangian".into(),
                Box::new(move |s: &mut Sampler| {
                    let inner = mk_inner_lag(s)?;
                    s.in_eulerian(inner, tau1, rho1)
                }),
                true,
                tau0 + tau1,
                rho1 + (gn * (tau0 + tau1)).exp() * rho0,
            ),
            (
                // Γ̂(τ₁,ρ₁; Ĉ(τ₀,ρ₀;p)) ⊆ Ĉ(τ₀+τ₁, e^{‖∇v‖τ₁}(ρ₀+ρ₁); p)
                "lagrangian of eulerian".into(),
                Box::new(move |s: &mut Sampler| {
                    let inner = mk_inner_eul(s)?;
                    s.in_lagrangian(inner, tau1, rho1)
                }),
                true,
                tau0 + tau1,
                (gn * tau1).exp() * (rho0 + rho1),
            ),
        ];
        for (name, mut draw, _eul, tau_rhs, rho_rhs) in cases {
            let mut fails = Vec::new();
            let mut n = 0;
            let mut min_margin = f64::INFINITY;
            for _ in 0..samples {
                let q = match draw(&mut s) {
                    Some(q) => q,
                    None => continue,
                };
                n += 1;
                match eulerian_margin(
                    &EulerianCylinder { flow: map, tau: tau_rhs, rho: infl * rho_rhs, center },
                    q,
                ) {
                    Some(m) => {
                        min_margin = min_margin.min(m);
                        if m < 0.0 {
                            fails.push(ContainmentFailure { point: q, margin: m });
                        }
                    }
                    None => fails.push(ContainmentFailure { point: q, margin: -1.0 }),
                }
            }
            checks.push(LemmaCheck {
                lemma: format!("containment: {name}"),
                samples: n,
                min_margin,
                pass: fails.is_empty(),
                failures: fails,
            });
        }
    }

    // Comparison lemma: Ĉ_v(τ,ρ;p) ⊆ Ĉ_u(τ, ρ + τ‖v−u‖ e^{τ min(‖∇u‖,‖∇v‖)}; p).
    if let Some((map_u, vu_gap)) = other {
        let gn_u = crate::flow::sup_gradient_norm(map_u.velocity());
        let rho_rhs = rho0 + tau0 * vu_gap * (tau0 * grad_norm.min(gn_u)).exp();
        let mut fails = Vec::new();
        let mut n = 0;
        let mut min_margin = f64::INFINITY;
        for _ in 0..samples {
            let q = match s.in_eulerian(center, tau0, rho0) {
                Some(q) => q,
                None => continue,
            };
            n += 1;
            match eulerian_margin(
                &EulerianCylinder { flow: map_u, tau: tau0, rho: infl * rho_rhs, center },
                q,
            ) {
                Some(m) => {
                    min_margin = min_margin.min(m);
                    if m < 0.0 {
                        fails.push(ContainmentFailure { point: q, margin: m });
                    }
                }
                None => fails.push(ContainmentFailure { point: q, margin: -1.0 }),
            }
        }
        checks.push(LemmaCheck {
            lemma: "cylinder comparison across velocity fields".into(),
            samples: n,
            min_margin,
            pass: fails.is_empty(),
            failures: fails,
        });
    }

    let pass = checks.iter().all(|c| c.pass);
    CylinderLemmaReport { checks, pass }
}

/// Agreement check for Lagrangian neighborhoods of a set: if `v = u`
/// outside a closed set contained in the open node-set `omega`, then
/// `Γ̂_v(τ,ρ;Ω) = Γ̂_u(τ,ρ;Ω)`.  Evaluates both membership predicates at
/// random spacetime query points and counts disagreements.
#[allow(clippy::too_many_arguments)]
pub fn verify_lagrangian_agreement(
    map_v: &FlowMap,
    map_u: &FlowMap,
    tau: f64,
    rho: f64,
    omega: &SpaceTimeMask,
    samples: usize,
    seed: u64,
) -> LemmaCheck {
    let g = map_v.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fails = Vec::new();
    for _ in 0..samples {
        let t = rng.gen_range(g.t0..g.t1);
        let mut x = [0.0; 3];
        for a in 0..3 {
            let (lo, hi) = (g.x0[a], g.x1[a]);
            let margin = if g.periodic[a] { 0.0 } else { 0.1 * (hi - lo) };
            x[a] = rng.gen_range(lo + margin..hi - margin);
        }
        let q: Point = (t, x);
        let in_v = lagrangian_set_contains(map_v, tau, rho, omega, q);
        let in_u = lagrangian_set_contains(map_u, tau, rho, omega, q);
        if in_v != in_u {
            fails.push(ContainmentFailure { point: q, margin: 0.0 });
        }
    }
    LemmaCheck {
        lemma: "lagrangian neighborhoods agree for fields equal outside the set".into(),
        samples,
        min_margin: if fails.is_empty() { 0.0 } else { -1.0 },
        pass: fails.is_empty(),
        failures: fails,
    }
}
