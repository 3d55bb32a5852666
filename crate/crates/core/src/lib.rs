//! Subsystem entropy change in weakly coupled bipartite scattering.
//!
//! A state on `A (x) B` is scattered by `S = exp(i lambda T1)`. The crate
//! classifies the incoming state and first-order T-matrix against the
//! monotonicity criteria (kernel of the reduced state, commutation with the
//! reduced eigenprojectors, kernel-mixing T acting nontrivially on B),
//! evaluates the closed-form perturbative coefficients of the entropy change
//! `dS(lambda) = a lambda + b lambda^2 ln(1/lambda^2) + c lambda^2 + ...`, and
//! checks them against exact finite-dimensional evolution.
//!
//! Module map:
//!
//! - [`linalg`]: dense complex matrices, Jacobi eigensolver, exponential,
//!   Kronecker product, partial trace.
//! - [`qstate`]: density matrices, entropy, reduced-state spectral data.
//! - [`smatrix`]: T-matrix pairs obeying order-by-order unitarity and the
//!   exact S oracle.
//! - [`criteria`]: guarantee classification.
//! - [`perturb`]: perturbative predictions.
//! - [`oracle`]: exact evolution and asymptotic coefficient fitting.
//! - [`harness`]: scenario files, the built-in library, demon search,
//!   guarantee probe, reports.

pub mod criteria;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod perturb;
pub mod qstate;
pub mod smatrix;

use serde::{Deserialize, Serialize};

pub use linalg::{ComplexMatrix, C64};
pub use qstate::{BipartiteState, DensityMatrix};

/// Numerical thresholds shared by classification and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Reduced-state eigenvalues at or below this are exact zeros.
    pub kernel_tol: f64,
    /// Eigenvalues closer than this share a degeneracy class.
    pub degen_tol: f64,
    /// Max-norm threshold for commutators and T-matrix element tests.
    pub commutator_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kernel_tol: 1e-12,
            degen_tol: 1e-9,
            commutator_tol: 1e-10,
        }
    }
}
