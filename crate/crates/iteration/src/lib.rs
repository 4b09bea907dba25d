//! One stage of the iteration: given an Euler–Reynolds state `(v, p, R)`
//! with declared frequency-energy levels and a prescribed energy density
//! `e(t,x)`, produce a corrected state `(v₁, p₁, R₁)` whose stress is the
//! five-term error ledger of the construction, each oscillatory term
//! closed by a finite parametrix expansion plus an exact compact-support
//! divergence solve.

pub mod oscillatory;
pub mod params;
pub mod patch;
pub mod stage;
pub mod terms;
pub mod verify;

pub use oscillatory::{
    parametrix_expand, parametrix_solve, OscillatoryForce, ParametrixExpansion, ParametrixSolution,
};
pub use params::{choose_parameters, AuditEntry, StageConfig, StageParameters};
pub use patch::{CPatch, PatchBox, RPatch};
pub use stage::{run_stage, LedgerNorms, StageDiagnostics, StageInput, StageOutput, StressLedger};
pub use terms::compute_q_m;
pub use verify::{energy_prescription, verify_stage, CheckLine, EnergyPrescriptionReport, StageReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IterationError {
    #[error("oscillation count N = {n} below the admissible floor {min}")]
    NTooSmall { n: f64, min: f64 },
    #[error("frequency {lambda} exceeds the resolution guard {max} (three cells per oscillation)")]
    UnderResolved { lambda: f64, max: f64 },
    #[error("energy lower bound violated: e = {value} < {needed} near the stress support at slice {it}")]
    EnergyLowerBound { value: f64, needed: f64, it: usize },
    #[error("phase gradient {value} under the floor {floor} on an oscillatory support")]
    PhaseFloor { value: f64, floor: f64 },
    #[error("declared levels rejected: {0}")]
    Levels(String),
    #[error(transparent)]
    Field(#[from] fields_core::FieldError),
    #[error(transparent)]
    Moll(#[from] mollification::MollError),
    #[error(transparent)]
    Wave(#[from] waves::WaveError),
    #[error(transparent)]
    SymDiv(#[from] symdiv::SymDivError),
}
