//! Enumeration of AC power-flow solutions inside a voltage box.
//!
//! The pipeline is: [`case`] data → rectangular quadratic program
//! ([`qcpf`]) → SDP relaxation tightened with RLT envelopes
//! ([`relaxation`]) → branch-and-bound over boxes ([`enumerator`]).
//! [`continuum`] detects networks whose solution set contains curves
//! (a grounded zero-injection bus with a pendant PV bus) and assembles them.

// Links the system OpenBLAS used by the conic solver.
extern crate openblas_src;

pub mod case;
pub mod cases;
pub mod continuum;
pub mod enumerator;
pub mod pf;
pub mod qcpf;
pub mod relaxation;
pub mod solutions;

pub use case::{build_ybus, parse_case, AdmittanceMatrix, BranchParams, BusKind, BusSpec, CaseError, NetworkCase};
pub use pf::{branch_flows, newton_refine, residuals, NewtonOptions, PolarSolution, ResidualVector};
pub use qcpf::{build_qcpf, eval_violation, BoxBounds, QcpfProblem, QuadraticConstraint, RectState};
pub use relaxation::{build_relaxation, obbt_tighten, solve_relaxation, ConicProgram, Lift, RelaxationOptions, RelaxationResult, SolveStatus};
