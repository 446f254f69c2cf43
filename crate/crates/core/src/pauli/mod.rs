//! Magnetic sector: azimuthal field families, the Pauli operator in `j_z`
//! blocks, the localized Scott functional and its minimisation, and the
//! magnetic Lieb–Thirring envelope.

pub mod field;
pub mod legendre;
pub mod lt;
pub mod operator;
pub mod scott;

pub use field::{gauge_center, FieldAnsatz, FieldFamily, Mode, SampledField};
pub use lt::{fitted_constant, lt_terms, magnetic_lt_rhs, LtTerms};
pub use operator::{PauliGrid, PauliSpec, PauliTrace};
pub use scott::{
    minimize_over_family, minimize_scott, scott_functional, FamilyMinimum, MinimizeOutcome, OptimizerBudget, ScottProblem,
    KAPPA0,
};

use crate::error::Result;
use crate::exec::Execution;
use crate::model::RadialFn;

/// `Tr[φ([σ·(−ih∇ + A)]² − V)φ]_-` for a single ansatz; `V` carries any
/// chemical-potential shift and `phi` vanishes beyond `support`.
pub fn pauli_trace_neg(
    a: &FieldAnsatz,
    v: &dyn RadialFn,
    h: f64,
    phi: &dyn RadialFn,
    support: f64,
    spec: &PauliSpec,
    exec: Execution,
) -> Result<PauliTrace> {
    PauliGrid::new(&a.family, v, h, phi, support, spec, exec)?.trace(&a.theta, exec)
}
