//! Dense complex linear algebra for the small Hilbert spaces used here.
//!
//! Everything is row-major and square. Hermiticity, unitarity and positivity
//! are predicates with explicit tolerances rather than type-level promises.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: max |H - H^dagger| = {defect:.3e} exceeds {bound:.3e}")]
    NonHermitianInput { defect: f64, bound: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps (off-diagonal norm {off_norm:.3e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("product dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix must have dimension at least 1 and {expected} entries, got {found}")]
    Malformed { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Tolerances and limits for this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinalgConfig {
    /// Hermiticity precondition, relative to the max-norm of the input.
    pub hermitian_rel_tol: f64,
    /// Jacobi stops once the off-diagonal Frobenius norm is below this
    /// fraction of the full Frobenius norm.
    pub offdiag_rel_tol: f64,
    pub max_sweeps: usize,
    pub max_dim: usize,
}

impl Default for LinalgConfig {
    fn default() -> Self {
        Self {
            hermitian_rel_tol: 1e-10,
            offdiag_rel_tol: 1e-14,
            max_sweeps: 100,
            max_dim: 4096,
        }
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from a row-major entry vector; the length must be a nonzero square.
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(LinalgError::Malformed {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| C64::new(rows[i][j], 0.0))
    }

    /// Outer product |u><v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// max |A_ij - B_ij|.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |H - H^dagger|.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// max |U^dagger U - 1|.
    pub fn unitarity_defect(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// (H + H^dagger)/2.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// U A U^dagger.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    /// U^dagger A U, i.e. A expressed in the basis given by the columns of U.
    pub fn in_basis(&self, u: &Self) -> Self {
        &(&u.adjoint() * self) * u
    }

    /// Restriction to the rows and columns listed in `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    /// The B-operator <i|M|j> of a matrix on an (d_a * d_b)-dimensional
    /// product space, A-index major.
    pub fn b_block(&self, d_a: usize, d_b: usize, i: usize, j: usize) -> Self {
        debug_assert_eq!(self.dim, d_a * d_b);
        Self::from_fn(d_b, |k, l| self[(i * d_b + k, j * d_b + l)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.entries[k * n..(k + 1) * n];
                let dst = &mut out.entries[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        ComplexMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in difference");
        ComplexMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}

/// AB - BA.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &(a * b) - &(b * a)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the orthonormal eigenvectors, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    /// U f(diag) U^dagger.
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let n = u.dim();
        let vals: Vec<C64> = self.eigenvalues.iter().map(|&x| f(x)).collect();
        ComplexMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| u[(i, k)] * vals[k] * u[(j, k)].conj()).sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|x| C64::new(x, 0.0))
    }
}

pub fn eig_hermitian(h: &ComplexMatrix) -> Result<Spectrum> {
    eig_hermitian_with(h, &LinalgConfig::default())
}

/// Cyclic complex Jacobi. Each rotation first removes the phase of the
/// pivot element and then applies a real symmetric Jacobi rotation.
pub fn eig_hermitian_with(h: &ComplexMatrix, cfg: &LinalgConfig) -> Result<Spectrum> {
    let n = h.dim();
    let defect = h.hermitian_defect();
    let bound = cfg.hermitian_rel_tol * h.max_norm();
    if defect > bound {
        return Err(LinalgError::NonHermitianInput { defect, bound });
    }
    let mut a = h.hermitian_part();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);
    let threshold = cfg.offdiag_rel_tol * a.frobenius_norm();
    let skip_below = 1e-300_f64.max(1e-20 * threshold);

    let off_norm = |a: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == cfg.max_sweeps {
            return Err(LinalgError::NoConvergence {
                sweeps,
                off_norm: off_norm(&a),
            });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= skip_below {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase_conj = (apq / r).conj();
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = phase_conj * (-s);
                let jqq = phase_conj * c;
                rotate_columns(&mut a, p, q, jpp, jpq, jqp, jqq);
                rotate_rows(&mut a, p, q, jpp, jpq, jqp, jqq);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(app - t * r, 0.0);
                a[(q, q)] = C64::new(aqq + t * r, 0.0);
                rotate_columns(&mut v, p, q, jpp, jpq, jqp, jqq);
            }
        }
        converged = off_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vecs = ComplexMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    reorthonormalize_columns(&mut vecs);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: vecs,
    })
}

// M <- M J on columns p, q.
fn rotate_columns(m: &mut ComplexMatrix, p: usize, q: usize, jpp: C64, jpq: C64, jqp: C64, jqq: C64) {
    for k in 0..m.dim() {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * jpp + mkq * jqp;
        m[(k, q)] = mkp * jpq + mkq * jqq;
    }
}

// M <- J^dagger M on rows p, q.
fn rotate_rows(m: &mut ComplexMatrix, p: usize, q: usize, jpp: C64, jpq: C64, jqp: C64, jqq: C64) {
    for k in 0..m.dim() {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = jpp.conj() * mpk + jqp.conj() * mqk;
        m[(q, k)] = jpq.conj() * mpk + jqq.conj() * mqk;
    }
}

/// Modified Gram-Schmidt over the columns, in place.
pub fn reorthonormalize_columns(m: &mut ComplexMatrix) {
    let n = m.dim();
    for j in 0..n {
        for k in 0..j {
            let proj: C64 = (0..n).map(|i| m[(i, k)].conj() * m[(i, j)]).sum();
            for i in 0..n {
                let mik = m[(i, k)];
                m[(i, j)] -= proj * mik;
            }
        }
        let norm = (0..n).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..n {
                m[(i, j)] /= norm;
            }
        }
    }
}

/// exp(i * lambda * H) through the spectral decomposition of H.
pub fn matexp_skew(h: &ComplexMatrix, lambda: f64) -> Result<ComplexMatrix> {
    Ok(unitary_from_spectrum(&eig_hermitian(h)?, lambda))
}

/// exp(i * lambda * H) for an already-diagonalized H.
pub fn unitary_from_spectrum(spec: &Spectrum, lambda: f64) -> ComplexMatrix {
    spec.apply_fn(|x| C64::from_polar(1.0, lambda * x))
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with(a, b, LinalgConfig::default().max_dim)
}

pub fn kron_with(a: &ComplexMatrix, b: &ComplexMatrix, max_dim: usize) -> Result<ComplexMatrix> {
    let (da, db) = (a.dim(), b.dim());
    let dim = da.saturating_mul(db);
    if dim > max_dim {
        return Err(LinalgError::DimensionOverflow { dim, max: max_dim });
    }
    Ok(ComplexMatrix::from_fn(dim, |r, c| {
        a[(r / db, c / db)] * b[(r % db, c % db)]
    }))
}

/// Partial trace over the second (B) factor.
pub fn partial_trace_b(m: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<ComplexMatrix> {
    if m.dim() != d_a * d_b {
        return Err(LinalgError::DimensionMismatch {
            expected: d_a * d_b,
            found: m.dim(),
        });
    }
    Ok(ComplexMatrix::from_fn(d_a, |i, j| {
        (0..d_b).map(|k| m[(i * d_b + k, j * d_b + k)]).sum()
    }))
}
