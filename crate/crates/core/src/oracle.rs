//! Exact evolution `rho_out = S rho S^dagger` and extraction of the
//! coefficients of `dS(lambda) = a lambda + b lambda^2 ln(1/lambda^2) + c lambda^2`
//! from a sweep over lambda.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, Spectrum};
use crate::qstate::{self, BipartiteState, QStateError};

pub const UNITARITY_TOL: f64 = 1e-10;
pub const MAX_LAMBDA: f64 = 0.5;
pub const MAX_GRID_LAMBDA: f64 = 0.1;
pub const MIN_GRID_POINTS: usize = 6;
pub const MIN_GRID_DECADES: f64 = 3.0;
pub const FIT_CONDITION_LIMIT: f64 = 1e8;
pub const DEFAULT_GRID: [f64; 7] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("S is not unitary: defect {defect:.3e} exceeds {UNITARITY_TOL:e}")]
    NonUnitary { defect: f64 },
    #[error("S has dimension {found}, state has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lambda = {0} is outside (0, {MAX_LAMBDA}]")]
    LambdaOutOfRange(f64),
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error("fit basis is ill-conditioned: condition estimate {condition:.3e} exceeds {FIT_CONDITION_LIMIT:e}")]
    IllConditionedFit { condition: f64 },
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Conservation defects of one exact evolution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EvolutionDiagnostics {
    /// |S(rho_out) - S(rho_in)| for the full system.
    pub full_entropy_change: f64,
    /// Max difference of the sorted full spectra.
    pub spectrum_defect: f64,
    /// |tr rho_out - 1|.
    pub trace_defect: f64,
}

static EVOLUTIONS: AtomicU64 = AtomicU64::new(0);
static WORST_ENTROPY: AtomicU64 = AtomicU64::new(0);
static WORST_SPECTRUM: AtomicU64 = AtomicU64::new(0);
static WORST_TRACE: AtomicU64 = AtomicU64::new(0);

// Bit patterns of non-negative floats order like the floats themselves.
fn record(slot: &AtomicU64, value: f64) {
    let v = if value.is_nan() { f64::INFINITY } else { value.abs() };
    slot.fetch_max(v.to_bits(), Ordering::Relaxed);
}

fn record_diagnostics(d: &EvolutionDiagnostics) {
    EVOLUTIONS.fetch_add(1, Ordering::Relaxed);
    record(&WORST_ENTROPY, d.full_entropy_change);
    record(&WORST_SPECTRUM, d.spectrum_defect);
    record(&WORST_TRACE, d.trace_defect);
}

/// Worst defects over every exact evolution in this process, with the count.
pub fn worst_diagnostics() -> (u64, EvolutionDiagnostics) {
    let load = |s: &AtomicU64| f64::from_bits(s.load(Ordering::Relaxed));
    (
        EVOLUTIONS.load(Ordering::Relaxed),
        EvolutionDiagnostics {
            full_entropy_change: load(&WORST_ENTROPY),
            spectrum_defect: load(&WORST_SPECTRUM),
            trace_defect: load(&WORST_TRACE),
        },
    )
}

pub fn evolve_exact(state: &BipartiteState, s: &ComplexMatrix) -> Result<BipartiteState> {
    Ok(evolve_exact_with_diagnostics(state, s)?.0)
}

pub fn evolve_exact_with_diagnostics(
    state: &BipartiteState,
    s: &ComplexMatrix,
) -> Result<(BipartiteState, EvolutionDiagnostics)> {
    if s.dim() != state.matrix().dim() {
        return Err(OracleError::DimensionMismatch {
            expected: state.matrix().dim(),
            found: s.dim(),
        });
    }
    let defect = s.unitarity_defect();
    if defect > UNITARITY_TOL {
        return Err(OracleError::NonUnitary { defect });
    }
    let out = BipartiteState::from_matrix(state.matrix().conjugate_by(s), state.d_a(), state.d_b())?;
    let before = state.rho().eigenvalues();
    let after = out.rho().eigenvalues();
    let diag = EvolutionDiagnostics {
        full_entropy_change: (qstate::entropy_from_eigenvalues(after, 0.0)
            - qstate::entropy_from_eigenvalues(before, 0.0))
        .abs(),
        spectrum_defect: before
            .iter()
            .zip(after)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
        trace_defect: (out.matrix().trace().re - 1.0).abs(),
    };
    record_diagnostics(&diag);
    Ok((out, diag))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= MAX_LAMBDA) {
        return Err(OracleError::LambdaOutOfRange(lambda));
    }
    Ok(())
}

/// Exact evolution for a fixed state and T1 over many couplings; the
/// spectrum of T1 and the input entropy are computed once.
#[derive(Debug, Clone)]
pub struct Evolver<'a> {
    state: &'a BipartiteState,
    t1_spectrum: Spectrum,
    entropy_in: f64,
}

impl<'a> Evolver<'a> {
    pub fn new(state: &'a BipartiteState, t1: &ComplexMatrix) -> Result<Self> {
        if t1.dim() != state.matrix().dim() {
            return Err(OracleError::DimensionMismatch {
                expected: state.matrix().dim(),
                found: t1.dim(),
            });
        }
        let t1_spectrum = linalg::eig_hermitian(t1)?;
        let entropy_in = qstate::entropy_from_eigenvalues(qstate::reduced_a(state)?.eigenvalues(), 0.0);
        Ok(Self {
            state,
            t1_spectrum,
            entropy_in,
        })
    }

    pub fn evolve(&self, lambda: f64) -> Result<(BipartiteState, EvolutionDiagnostics)> {
        check_lambda(lambda)?;
        let s = linalg::unitary_from_spectrum(&self.t1_spectrum, lambda);
        evolve_exact_with_diagnostics(self.state, &s)
    }

    pub fn delta_entropy(&self, lambda: f64) -> Result<f64> {
        let (out, _) = self.evolve(lambda)?;
        let after = qstate::entropy_from_eigenvalues(qstate::reduced_a(&out)?.eigenvalues(), 0.0);
        Ok(after - self.entropy_in)
    }
}

/// `S(rho_A out) - S(rho_A in)` under `S = exp(i lambda T1)`.
pub fn exact_delta_entropy(state: &BipartiteState, t1: &ComplexMatrix, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Evolver::new(state, t1)?.delta_entropy(lambda)
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub delta_s_exact: f64,
    pub model_value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda_grid: Vec<f64>,
    /// Max |exact - model| over the grid.
    pub residual_max: f64,
    /// 2-norm condition number of the column-normalized weighted design.
    pub condition_estimate: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepFit {
    pub fn model(&self, lambda: f64) -> f64 {
        model(self.a, self.b, self.c, lambda)
    }
}

fn model(a: f64, b: f64, c: f64, lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    a * lambda + b * l2 * (1.0 / l2).ln() + c * l2
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < MIN_GRID_POINTS {
        return Err(OracleError::InvalidGrid(format!(
            "{} points, at least {MIN_GRID_POINTS} required",
            grid.len()
        )));
    }
    if let Some(&bad) = grid.iter().find(|&&l| !(l > 0.0 && l <= MAX_GRID_LAMBDA)) {
        return Err(OracleError::InvalidGrid(format!("{bad} is outside (0, {MAX_GRID_LAMBDA}]")));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] >= w[0]) {
        return Err(OracleError::InvalidGrid(format!(
            "not strictly decreasing at {} -> {}",
            w[0], w[1]
        )));
    }
    let decades = (grid[0] / grid[grid.len() - 1]).log10();
    if decades < MIN_GRID_DECADES - 1e-9 {
        return Err(OracleError::InvalidGrid(format!(
            "spans {decades:.2} decades, at least {MIN_GRID_DECADES} required"
        )));
    }
    Ok(())
}

/// Weighted least-squares fit of `values` against `{lambda,
/// lambda^2 ln(1/lambda^2), lambda^2}` with weights `1/lambda^2`. Returns
/// `(a, b, c, condition)`.
pub fn fit_coefficients(lambdas: &[f64], values: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = lambdas.len();
    if values.len() != n || n < 3 {
        return Err(OracleError::InvalidGrid(format!(
            "{n} abscissae for {} values",
            values.len()
        )));
    }
    let mut design = DMatrix::from_fn(n, 3, |i, j| {
        let l = lambdas[i];
        match j {
            0 => 1.0 / l,
            1 => (1.0 / (l * l)).ln(),
            _ => 1.0,
        }
    });
    let rhs = DVector::from_iterator(n, values.iter().zip(lambdas).map(|(v, l)| v / (l * l)));
    let norms: Vec<f64> = (0..3).map(|j| design.column(j).norm()).collect();
    for (j, &s) in norms.iter().enumerate() {
        design.column_mut(j).unscale_mut(s);
    }
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if condition.is_nan() || condition > FIT_CONDITION_LIMIT {
        return Err(OracleError::IllConditionedFit { condition });
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| OracleError::InvalidGrid(e.to_string()))?;
    Ok((x[0] / norms[0], x[1] / norms[1], x[2] / norms[2], condition))
}

pub fn sweep_and_fit(state: &BipartiteState, t1: &ComplexMatrix, grid: &[f64]) -> Result<SweepFit> {
    validate_grid(grid)?;
    let evolver = Evolver::new(state, t1)?;
    let values = grid
        .par_iter()
        .map(|&l| evolver.delta_entropy(l))
        .collect::<Result<Vec<f64>>>()?;
    let (a, b, c, condition_estimate) = fit_coefficients(grid, &values)?;
    let rows: Vec<SweepRow> = grid
        .iter()
        .zip(&values)
        .map(|(&lambda, &delta_s_exact)| {
            let model_value = model(a, b, c, lambda);
            SweepRow {
                lambda,
                delta_s_exact,
                model_value,
                residual: delta_s_exact - model_value,
            }
        })
        .collect();
    Ok(SweepFit {
        a,
        b,
        c,
        lambda_grid: grid.to_vec(),
        residual_max: rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        condition_estimate,
        rows,
    })
}
