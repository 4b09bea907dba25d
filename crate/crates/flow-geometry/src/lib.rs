//! Flow maps and the Eulerian/Lagrangian cylinder calculus.
//!
//! This crate provides the advective geometry underlying the wave
//! construction: RK4 flow maps of `∂_t + v·∇` over gridded velocity
//! fields, Eulerian cylinders (balls carried along a trajectory) and
//! Lagrangian cylinders (trajectory bundles from a ball), boolean masks
//! for cylinder neighborhoods of node sets, and samplers that verify the
//! Gronwall separation bounds and the cylinder containment lemmas.

mod cylinder;
mod flow;
mod verify;

pub use cylinder::{
    eulerian_contains, eulerian_cylinder_mask, lagrangian_contains, lagrangian_cylinder_mask,
    lagrangian_set_contains, EulerianCylinder, LagrangianCylinder, Point, SpaceTimeMask,
};
pub use flow::{sup_gradient_norm, FlowError, FlowMap};
pub use verify::{
    verify_cylinder_lemmas, verify_flow_separation, verify_lagrangian_agreement,
    ContainmentFailure, CylinderLemmaReport, LemmaCheck, SeparationReport,
};
