//! Density matrices on A (x) B, von Neumann entropy, and the spectral data of
//! the reduced state that the rest of the crate is organised around.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, Spectrum, C64};

/// Validity tolerance for density matrices (Hermiticity, positivity, trace).
pub const DENSITY_TOL: f64 = 1e-10;

/// Eigenvalues strictly inside `(kernel_tol, NEAR_KERNEL_CEILING)` make the
/// kernel / full-rank dichotomy ambiguous.
pub const NEAR_KERNEL_CEILING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QStateError {
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("state dimension {found} does not factor as {d_a} x {d_b}")]
    DimensionMismatch { d_a: usize, d_b: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, QStateError>;

/// Hermitian, positive semidefinite, unit trace (within [`DENSITY_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
    spectrum: Spectrum,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let herm = mat.hermitian_defect();
        if herm > DENSITY_TOL {
            return Err(QStateError::InvalidDensity(format!(
                "not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(QStateError::InvalidDensity(format!(
                "trace is {:.12} + {:.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let mat = mat.hermitian_part();
        let spectrum = linalg::eig_hermitian(&mat)?;
        let min = spectrum.eigenvalues[0];
        if min < -DENSITY_TOL {
            return Err(QStateError::InvalidDensity(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { mat, spectrum })
    }

    /// |psi><psi| for a normalized vector.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        Self::new(ComplexMatrix::outer(amplitudes, amplitudes))
    }

    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real_diag(weights))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }
}

/// -sum p ln p over `eigs`, in nats. Eigenvalues are clamped to `[0, 1]` and
/// those at or below `cutoff` contribute nothing.
pub fn entropy_from_eigenvalues(eigs: &[f64], cutoff: f64) -> f64 {
    eigs.iter()
        .map(|&p| p.clamp(0.0, 1.0))
        .filter(|&p| p > cutoff && p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_from_eigenvalues(rho.eigenvalues(), crate::Tolerances::default().kernel_tol)
}

/// A density matrix on a d_a * d_b product space, A-index major.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    rho: DensityMatrix,
    d_a: usize,
    d_b: usize,
}

impl BipartiteState {
    pub fn new(rho: DensityMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        if d_a == 0 || d_b == 0 || rho.dim() != d_a * d_b {
            return Err(QStateError::DimensionMismatch {
                d_a,
                d_b,
                found: rho.dim(),
            });
        }
        Ok(Self { rho, d_a, d_b })
    }

    pub fn from_matrix(mat: ComplexMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        Self::new(DensityMatrix::new(mat)?, d_a, d_b)
    }

    pub fn product(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<Self> {
        let mat = linalg::kron(rho_a.matrix(), rho_b.matrix())?;
        Self::from_matrix(mat, rho_a.dim(), rho_b.dim())
    }

    /// Diagonal in the standard product basis with weights `table[m][mt]`.
    pub fn diagonal(table: &[Vec<f64>]) -> Result<Self> {
        let d_a = table.len();
        let d_b = table.first().map_or(0, Vec::len);
        if d_a == 0 || d_b == 0 || table.iter().any(|row| row.len() != d_b) {
            return Err(QStateError::InvalidDensity(
                "weight table must be a non-empty rectangular array".into(),
            ));
        }
        let flat: Vec<f64> = table.iter().flatten().copied().collect();
        Self::from_matrix(ComplexMatrix::from_real_diag(&flat), d_a, d_b)
    }

    pub fn pure(amplitudes: &[C64], d_a: usize, d_b: usize) -> Result<Self> {
        Self::new(DensityMatrix::pure(amplitudes)?, d_a, d_b)
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.rho.matrix()
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }
}

pub fn reduced_a(state: &BipartiteState) -> Result<DensityMatrix> {
    let m = linalg::partial_trace_b(state.matrix(), state.d_a, state.d_b)?;
    DensityMatrix::new(m)
}

/// Spectrum of the reduced A state with its kernel and degeneracy classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ASpectralData {
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: ComplexMatrix,
    /// Indices whose eigenvalue is at most `kernel_tol`.
    pub kernel: Vec<usize>,
    /// Partition of `0..d_a` into groups of (numerically) equal eigenvalues,
    /// ascending. The kernel, when present, is always exactly one class.
    pub classes: Vec<Vec<usize>>,
    pub kernel_tol: f64,
    pub degen_tol: f64,
}

impl ASpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_kernel(&self, m: usize) -> bool {
        self.eigenvalues[m] <= self.kernel_tol
    }

    pub fn class_of(&self, m: usize) -> usize {
        self.classes
            .iter()
            .position(|c| c.contains(&m))
            .expect("every index belongs to a class")
    }

    /// Mean eigenvalue of a class.
    pub fn class_value(&self, class: usize) -> f64 {
        let c = &self.classes[class];
        c.iter().map(|&m| self.eigenvalues[m]).sum::<f64>() / c.len() as f64
    }

    pub fn is_kernel_class(&self, class: usize) -> bool {
        self.is_kernel(self.classes[class][0])
    }

    /// Indices with eigenvalues in `(kernel_tol, NEAR_KERNEL_CEILING)`.
    pub fn near_kernel(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&m| {
                let p = self.eigenvalues[m];
                p > self.kernel_tol && p < NEAR_KERNEL_CEILING
            })
            .collect()
    }

    pub fn eigenvector(&self, m: usize) -> Vec<C64> {
        self.eigenvectors.column(m)
    }
}

pub fn a_spectral_data(
    state: &BipartiteState,
    kernel_tol: f64,
    degen_tol: f64,
) -> Result<ASpectralData> {
    let rho_a = reduced_a(state)?;
    Ok(spectral_data_of(rho_a.spectrum().clone(), kernel_tol, degen_tol))
}

pub(crate) fn spectral_data_of(spec: Spectrum, kernel_tol: f64, degen_tol: f64) -> ASpectralData {
    let eigs = spec.eigenvalues;
    let kernel: Vec<usize> = (0..eigs.len()).filter(|&m| eigs[m] <= kernel_tol).collect();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for m in 0..eigs.len() {
        let joins = m > 0
            && eigs[m] - eigs[m - 1] <= degen_tol
            && (eigs[m] <= kernel_tol) == (eigs[m - 1] <= kernel_tol);
        match classes.last_mut() {
            Some(last) if joins => last.push(m),
            _ => classes.push(vec![m]),
        }
    }
    ASpectralData {
        eigenvalues: eigs,
        eigenvectors: spec.eigenvectors,
        kernel,
        classes,
        kernel_tol,
        degen_tol,
    }
}
