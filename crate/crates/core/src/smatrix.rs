//! Perturbative T-matrices and the exact unitary used as evolution oracle.
//!
//! With `S = 1 + iT` and `T = lambda T1 + lambda^2 T2 + ...`, unitarity
//! forces `T1 = T1^dagger` and `T2 - T2^dagger = i T1 T1`. The exact oracle is
//! `S = exp(i lambda T1)`, whose expansion has `T2 = (i/2) T1^2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, C64, I};

pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SMatrixError {
    #[error("{which} is not Hermitian (defect {defect:.3e})")]
    NonHermitianInput { which: &'static str, defect: f64 },
    #[error("T2 - T2^dagger differs from i T1 T1 by {defect:.3e}")]
    UnitarityViolation { defect: f64 },
    #[error("element ({row}, {col}) assigned {first} and, through its conjugate, {second}")]
    ConflictingAssignment {
        row: usize,
        col: usize,
        first: C64,
        second: C64,
    },
    #[error("index ({m}, {mt}) out of range for {d_a} x {d_b}")]
    IndexOutOfRange {
        m: usize,
        mt: usize,
        d_a: usize,
        d_b: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, SMatrixError>;

/// Gaussian Hermitian sample: real standard normal diagonal, off-diagonal
/// `(g1 + i g2)/2`. Deterministic in `seed`.
pub fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let g1: f64 = StandardNormal.sample(&mut rng);
            if i == j {
                m[(i, i)] = C64::new(g1, 0.0);
            } else {
                let g2: f64 = StandardNormal.sample(&mut rng);
                let z = C64::new(g1, g2) * 0.5;
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
    }
    m
}

fn check_hermitian(m: &ComplexMatrix, which: &'static str) -> Result<()> {
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(SMatrixError::NonHermitianInput { which, defect });
    }
    Ok(())
}

/// First- and second-order T-matrix coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrixPair {
    pub t1: ComplexMatrix,
    pub t2: ComplexMatrix,
    pub d_a: usize,
    pub d_b: usize,
}

impl TMatrixPair {
    /// Checks both unitarity constraints.
    pub fn new(t1: ComplexMatrix, t2: ComplexMatrix, d_a: usize, d_b: usize) -> Result<Self> {
        for m in [&t1, &t2] {
            if m.dim() != d_a * d_b {
                return Err(SMatrixError::DimensionMismatch {
                    expected: d_a * d_b,
                    found: m.dim(),
                });
            }
        }
        check_hermitian(&t1, "T1")?;
        let defect = order2_residual(&t1, &t2);
        if defect > HERMITIAN_TOL {
            return Err(SMatrixError::UnitarityViolation { defect });
        }
        Ok(Self { t1, t2, d_a, d_b })
    }

    /// Hermitian part of T2, the only free piece at second order.
    pub fn t2_hermitian_part(&self) -> ComplexMatrix {
        self.t2.hermitian_part()
    }
}

// max |(T2 - T2^dagger) - i T1 T1|
fn order2_residual(t1: &ComplexMatrix, t2: &ComplexMatrix) -> f64 {
    let anti = t2 - &t2.adjoint();
    anti.max_abs_diff(&(t1 * t1).scale(I))
}

/// `T2 = h2 + (i/2) T1 T1`.
pub fn complete_second_order(
    t1: &ComplexMatrix,
    h2: &ComplexMatrix,
    d_a: usize,
    d_b: usize,
) -> Result<TMatrixPair> {
    check_hermitian(t1, "T1")?;
    check_hermitian(h2, "h2")?;
    if h2.dim() != t1.dim() {
        return Err(SMatrixError::DimensionMismatch {
            expected: t1.dim(),
            found: h2.dim(),
        });
    }
    let t2 = h2 + &(t1 * t1).scale(I * 0.5);
    TMatrixPair::new(t1.clone(), t2, d_a, d_b)
}

/// `exp(i lambda T1)`.
pub fn exact_s(t1: &ComplexMatrix, lambda: f64) -> Result<ComplexMatrix> {
    Ok(linalg::matexp_skew(t1, lambda)?)
}

/// Max-norm defects of the optical theorem for a truncated pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitarityReport {
    pub lambda: f64,
    /// max |i(T - T^dagger) + T T^dagger| with `T = lambda T1 + lambda^2 T2`.
    pub defect: f64,
    /// max |(T2 - T2^dagger) - i T1 T1|, the lambda^2 coefficient of the defect.
    pub order2_residual: f64,
    pub t1_hermitian_defect: f64,
    /// Set when either order of the constraint fails outright.
    pub flagged: bool,
}

pub fn verify_unitarity(pair: &TMatrixPair, lambda: f64) -> UnitarityReport {
    let t = &pair.t1.scale_real(lambda) + &pair.t2.scale_real(lambda * lambda);
    let td = t.adjoint();
    let lhs = &(&t - &td).scale(I) + &(&t * &td);
    let t1_hermitian_defect = pair.t1.hermitian_defect();
    let order2_residual = order2_residual(&pair.t1, &pair.t2);
    UnitarityReport {
        lambda,
        defect: lhs.max_norm(),
        order2_residual,
        t1_hermitian_defect,
        flagged: t1_hermitian_defect > HERMITIAN_TOL || order2_residual > HERMITIAN_TOL,
    }
}

/// `<m, mt| T1 |mp, mtp>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TElement {
    pub m: usize,
    pub mt: usize,
    pub mp: usize,
    pub mtp: usize,
    pub value: C64,
}

/// Nonzero elements of a structured T1; conjugates are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTSpec {
    pub d_a: usize,
    pub d_b: usize,
    pub elements: Vec<TElement>,
}

pub fn structured_t1(spec: &ScenarioTSpec) -> Result<ComplexMatrix> {
    let (d_a, d_b) = (spec.d_a, spec.d_b);
    let mut m = ComplexMatrix::zeros(d_a * d_b);
    let mut assigned = vec![false; d_a * d_b * d_a * d_b];
    let idx = |a: usize, b: usize| -> Result<usize> {
        if a >= d_a || b >= d_b {
            return Err(SMatrixError::IndexOutOfRange { m: a, mt: b, d_a, d_b });
        }
        Ok(a * d_b + b)
    };
    let mut set = |row: usize, col: usize, v: C64, m: &mut ComplexMatrix| -> Result<()> {
        let k = row * d_a * d_b + col;
        if assigned[k] && m[(row, col)] != v {
            return Err(SMatrixError::ConflictingAssignment {
                row,
                col,
                first: m[(row, col)],
                second: v,
            });
        }
        assigned[k] = true;
        m[(row, col)] = v;
        Ok(())
    };
    for e in &spec.elements {
        let row = idx(e.m, e.mt)?;
        let col = idx(e.mp, e.mtp)?;
        set(row, col, e.value, &mut m)?;
        set(col, row, e.value.conj(), &mut m)?;
    }
    Ok(m)
}

/// Elements of T1 in chosen A and B bases (columns of `u_a`, `u_b`).
#[derive(Debug, Clone, PartialEq)]
pub struct TElementView {
    rotated: ComplexMatrix,
    d_b: usize,
}

impl TElementView {
    pub fn new(t1: &ComplexMatrix, u_a: &ComplexMatrix, u_b: &ComplexMatrix) -> Result<Self> {
        let u = linalg::kron(u_a, u_b)?;
        if u.dim() != t1.dim() {
            return Err(SMatrixError::DimensionMismatch {
                expected: t1.dim(),
                found: u.dim(),
            });
        }
        Ok(Self {
            rotated: t1.in_basis(&u),
            d_b: u_b.dim(),
        })
    }

    /// Wraps a matrix already expressed in the product basis of interest.
    pub fn from_rotated(rotated: ComplexMatrix, d_b: usize) -> Self {
        Self { rotated, d_b }
    }

    pub fn element(&self, m: usize, mt: usize, mp: usize, mtp: usize) -> C64 {
        self.rotated[(m * self.d_b + mt, mp * self.d_b + mtp)]
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rotated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_hermitian, kron, ONE, ZERO};

    fn el(m: usize, mt: usize, mp: usize, mtp: usize, re: f64) -> TElement {
        TElement {
            m,
            mt,
            mp,
            mtp,
            value: C64::new(re, 0.0),
        }
    }

    #[test]
    fn random_hermitian_basic_properties() {
        let one = random_hermitian(1, 17);
        assert_eq!(one[(0, 0)].im, 0.0);
        assert_eq!(random_hermitian(4, 42), random_hermitian(4, 42));
        assert_ne!(random_hermitian(4, 42), random_hermitian(4, 43));
        assert!(random_hermitian(6, 1).hermitian_defect() == 0.0);
    }

    #[test]
    fn random_hermitian_eigenvalue_mean_is_near_zero() {
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..200 {
            let s = eig_hermitian(&random_hermitian(8, seed)).unwrap();
            total += s.eigenvalues.iter().sum::<f64>();
            count += s.eigenvalues.len();
        }
        assert!((total / count as f64).abs() < 0.2);
    }

    #[test]
    fn second_order_completion() {
        let z = ComplexMatrix::zeros(4);
        let p = complete_second_order(&z, &z, 2, 2).unwrap();
        assert_eq!(p.t2, z);
        let id = ComplexMatrix::identity(4);
        let p = complete_second_order(&id, &z, 2, 2).unwrap();
        assert!(p.t2.max_abs_diff(&id.scale(I * 0.5)) < 1e-15);
        let bad = ComplexMatrix::from_fn(4, |i, j| if i < j { ONE } else { ZERO });
        assert!(matches!(
            complete_second_order(&bad, &z, 2, 2),
            Err(SMatrixError::NonHermitianInput { which: "T1", .. })
        ));
    }

    #[test]
    fn completed_pair_defect_is_third_order() {
        let t1 = random_hermitian(4, 7);
        let h2 = random_hermitian(4, 8);
        let pair = complete_second_order(&t1, &h2, 2, 2).unwrap();
        let r = verify_unitarity(&pair, 1e-2);
        assert!(!r.flagged);
        assert!(r.defect <= 1e-5, "{}", r.defect);
        // lambda-ratio estimate of the leading power
        let d: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&l| verify_unitarity(&pair, l).defect)
            .collect();
        let c2 = d[0] / 1e-6;
        let c3 = d[1] / 1e-9;
        assert!(d[2] / 1e-12 <= 2.0 * c2.max(c3));
        assert!((d[0] / d[1]).log10() > 2.9);
    }

    #[test]
    fn broken_pair_is_flagged() {
        let t1 = random_hermitian(4, 9);
        let pair = TMatrixPair {
            t1: t1.clone(),
            t2: ComplexMatrix::zeros(4),
            d_a: 2,
            d_b: 2,
        };
        let lambda = 1e-2;
        let r = verify_unitarity(&pair, lambda);
        assert!(r.flagged);
        let expected = lambda * lambda * (&t1 * &t1).max_norm();
        assert!((r.defect - expected).abs() <= 1e-3 * expected);
        assert!(TMatrixPair::new(t1, ComplexMatrix::zeros(4), 2, 2).is_err());
        let z = TMatrixPair::new(ComplexMatrix::zeros(4), ComplexMatrix::zeros(4), 2, 2).unwrap();
        assert_eq!(verify_unitarity(&z, 0.1).defect, 0.0);
    }

    #[test]
    fn exact_s_cases() {
        let t1 = random_hermitian(4, 3);
        assert!(exact_s(&t1, 0.0).unwrap().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-14);

        let d = [0.3, -1.1, 2.0];
        let s = exact_s(&ComplexMatrix::from_real_diag(&d), 0.4).unwrap();
        for (k, &dk) in d.iter().enumerate() {
            assert!((s[(k, k)] - C64::from_polar(1.0, 0.4 * dk)).norm() < 1e-15);
        }
    }

    #[test]
    fn exact_s_taylor_remainder_is_cubic() {
        let t1 = random_hermitian(4, 5);
        let t1sq = &t1 * &t1;
        let rem = |l: f64| {
            let s = exact_s(&t1, l).unwrap();
            let approx = &(&ComplexMatrix::identity(4) + &t1.scale(I * l)) - &t1sq.scale_real(l * l / 2.0);
            s.max_abs_diff(&approx)
        };
        let (r2, r3) = (rem(1e-2), rem(1e-3));
        let c = r2 / 1e-6;
        assert!(r3 <= 2.0 * c * 1e-9, "{r2} {r3}");
        assert!(exact_s(&t1, 0.9).unwrap().unitarity_defect() <= 4e-12);
    }

    #[test]
    fn structured_two_two_level() {
        let spec = ScenarioTSpec {
            d_a: 2,
            d_b: 2,
            elements: vec![el(0, 0, 1, 1, 0.3), el(0, 1, 1, 0, 0.3)],
        };
        let t = structured_t1(&spec).unwrap();
        // |0,0>=0 |0,1>=1 |1,0>=2 |1,1>=3
        let mut expected = ComplexMatrix::zeros(4);
        for (r, c) in [(0, 3), (3, 0), (1, 2), (2, 1)] {
            expected[(r, c)] = C64::new(0.3, 0.0);
        }
        assert_eq!(t, expected);
        assert_eq!(t.hermitian_defect(), 0.0);
    }

    #[test]
    fn structured_edge_cases() {
        let empty = ScenarioTSpec {
            d_a: 2,
            d_b: 3,
            elements: vec![],
        };
        assert_eq!(structured_t1(&empty).unwrap(), ComplexMatrix::zeros(6));

        let single = ScenarioTSpec {
            d_a: 2,
            d_b: 2,
            elements: vec![TElement {
                m: 0,
                mt: 1,
                mp: 1,
                mtp: 0,
                value: C64::new(0.6, -0.8),
            }],
        };
        let t = structured_t1(&single).unwrap();
        let eig = eig_hermitian(&t).unwrap().eigenvalues;
        assert!((eig[0] + 1.0).abs() < 1e-14 && (eig[3] - 1.0).abs() < 1e-14);
        assert!(eig[1].abs() < 1e-14 && eig[2].abs() < 1e-14);

        let conflicting = ScenarioTSpec {
            d_a: 2,
            d_b: 2,
            elements: vec![el(0, 0, 1, 1, 0.3), el(1, 1, 0, 0, 0.5)],
        };
        assert!(matches!(
            structured_t1(&conflicting),
            Err(SMatrixError::ConflictingAssignment { .. })
        ));
        let complex_diag = ScenarioTSpec {
            d_a: 2,
            d_b: 2,
            elements: vec![TElement {
                m: 1,
                mt: 1,
                mp: 1,
                mtp: 1,
                value: C64::new(0.0, 1.0),
            }],
        };
        assert!(structured_t1(&complex_diag).is_err());
        let oob = ScenarioTSpec {
            d_a: 2,
            d_b: 2,
            elements: vec![el(0, 2, 1, 1, 0.3)],
        };
        assert!(matches!(structured_t1(&oob), Err(SMatrixError::IndexOutOfRange { .. })));
    }

    #[test]
    fn element_view_follows_basis_change() {
        let t1 = random_hermitian(6, 12);
        let ua = eig_hermitian(&random_hermitian(2, 1)).unwrap().eigenvectors;
        let ub = eig_hermitian(&random_hermitian(3, 2)).unwrap().eigenvectors;
        let view = TElementView::new(&t1, &ua, &ub).unwrap();
        let va = ua.column(1);
        let vb = ub.column(2);
        let wa = ua.column(0);
        let wb = ub.column(1);
        let bra: Vec<C64> = (0..6).map(|k| va[k / 3] * vb[k % 3]).collect();
        let ket: Vec<C64> = (0..6).map(|k| wa[k / 3] * wb[k % 3]).collect();
        let mut direct = ZERO;
        for i in 0..6 {
            for j in 0..6 {
                direct += bra[i].conj() * t1[(i, j)] * ket[j];
            }
        }
        assert!((view.element(1, 2, 0, 1) - direct).norm() < 1e-13);
        let u = kron(&ua, &ub).unwrap();
        assert!(view.matrix().conjugate_by(&u).max_abs_diff(&t1) < 1e-13);
    }
}
