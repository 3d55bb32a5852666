//! Guarantee classification of an incoming state and first-order T-matrix.
//!
//! Three conditions decide whether subsystem A's entropy must grow:
//!
//! 1. the reduced state `rho_A` has a nonempty kernel;
//! 2. `rho` commutes with `|m><m'| (x) 1_B` for every pair `m, m'` in a common
//!    eigenspace of `rho_A` (equivalently, `rho` is diagonal in a product
//!    eigenbasis with class-uniform B weights);
//! 3. `T1` has elements between kernel and non-kernel states, and those
//!    elements do not act as the identity on B.
//!
//! 1 and 2 give non-negativity at order `lambda^2 ln(1/lambda^2)`; all three
//! give strict increase.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError};
use crate::qstate::{self, ASpectralData, BipartiteState, QStateError};
use crate::smatrix::TElementView;
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("spectral data of dimension {adata} does not match d_a = {d_a}")]
    BasisMismatch { adata: usize, d_a: usize },
    #[error("T1 has dimension {found}, state has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, CriteriaError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Overall {
    StrictIncrease,
    NonNegativeAtLogOrder,
    NoGuarantee,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `[|m><m'| (x) 1_B, rho]` is nonzero.
    Commutator { m: usize, mp: usize, defect: f64 },
    /// `<m, mt| T1 |k, kt>` couples non-kernel `m` to kernel `k`.
    KernelMixing {
        m: usize,
        mt: usize,
        k: usize,
        kt: usize,
        magnitude: f64,
    },
    /// The kernel-mixing block `<m|T1|k>` is not a multiple of `1_B` on the
    /// support of the B weights of `m`.
    NontrivialOnB { m: usize, k: usize, defect: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeVerdict {
    pub kernel_nonempty: bool,
    pub commutation_ok: bool,
    pub t_mixes_kernel: bool,
    pub t_nontrivial_on_b: bool,
    pub overall: Overall,
    pub witnesses: Vec<Witness>,
}

impl GuaranteeVerdict {
    fn assemble(
        kernel_nonempty: bool,
        commutation_ok: bool,
        t_mixes_kernel: bool,
        t_nontrivial_on_b: bool,
        witnesses: Vec<Witness>,
    ) -> Self {
        let overall = match (kernel_nonempty && commutation_ok, t_mixes_kernel && t_nontrivial_on_b) {
            (true, true) => Overall::StrictIncrease,
            (true, false) => Overall::NonNegativeAtLogOrder,
            (false, _) => Overall::NoGuarantee,
        };
        Self {
            kernel_nonempty,
            commutation_ok,
            t_mixes_kernel,
            t_nontrivial_on_b,
            overall,
            witnesses,
        }
    }
}

fn check_basis(state: &BipartiteState, adata: &ASpectralData) -> Result<()> {
    if adata.dim() != state.d_a() {
        return Err(CriteriaError::BasisMismatch {
            adata: adata.dim(),
            d_a: state.d_a(),
        });
    }
    Ok(())
}

/// Commutator form of condition 2, over all pairs inside each degeneracy class.
pub fn check_commutation(
    state: &BipartiteState,
    adata: &ASpectralData,
    tol: f64,
) -> Result<(bool, Vec<Witness>)> {
    check_basis(state, adata)?;
    let id_b = ComplexMatrix::identity(state.d_b());
    let rho = state.matrix();
    let mut witnesses = Vec::new();
    for class in &adata.classes {
        for &m in class {
            for &mp in class {
                let proj = ComplexMatrix::outer(&adata.eigenvector(m), &adata.eigenvector(mp));
                let op = linalg::kron(&proj, &id_b)?;
                let defect = linalg::commutator(&op, rho).max_norm();
                if defect > tol {
                    witnesses.push(Witness::Commutator { m, mp, defect });
                }
            }
        }
    }
    Ok((witnesses.is_empty(), witnesses))
}

/// Product eigenbasis of the incoming state: eigenvectors of `rho_A`, and
/// for each degeneracy class a B basis diagonalizing that class's B block.
///
/// When the B blocks of all classes commute, one common B basis is used for
/// every class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductBasis {
    pub u_a: ComplexMatrix,
    pub class_b: Vec<ComplexMatrix>,
    /// `weights[m][mt]`: diagonal of `<m|rho|m>` in the B basis of m's class.
    pub weights: Vec<Vec<f64>>,
    pub common_b: Option<ComplexMatrix>,
    /// Largest deviation of `rho` from the diagonal, class-uniform form.
    pub special_form_defect: f64,
    d_b: usize,
    class_of: Vec<usize>,
}

impl ProductBasis {
    pub fn build(state: &BipartiteState, adata: &ASpectralData, tol: f64) -> Result<Self> {
        check_basis(state, adata)?;
        let (d_a, d_b) = (state.d_a(), state.d_b());
        let u_a = adata.eigenvectors.clone();
        let frame_a = linalg::kron(&u_a, &ComplexMatrix::identity(d_b))?;
        let rho_a_basis = state.matrix().in_basis(&frame_a);
        let block = |m: usize, mp: usize| rho_a_basis.b_block(d_a, d_b, m, mp);

        let class_of: Vec<usize> = (0..d_a).map(|m| adata.class_of(m)).collect();
        let sigmas: Vec<ComplexMatrix> = adata
            .classes
            .iter()
            .map(|c| {
                let sum = c
                    .iter()
                    .fold(ComplexMatrix::zeros(d_b), |acc, &m| &acc + &block(m, m));
                sum.scale_real(1.0 / c.len() as f64)
            })
            .collect();

        let common_b = common_eigenbasis(&sigmas, tol)?;
        let class_b: Vec<ComplexMatrix> = match &common_b {
            Some(u) => vec![u.clone(); sigmas.len()],
            None => sigmas
                .iter()
                .map(|s| Ok(linalg::eig_hermitian(s)?.eigenvectors))
                .collect::<Result<_>>()?,
        };

        let mut defect: f64 = 0.0;
        let mut weights = vec![vec![0.0; d_b]; d_a];
        for m in 0..d_a {
            let ub_m = &class_b[class_of[m]];
            let sigma_m = sigmas[class_of[m]].in_basis(ub_m);
            for mp in 0..d_a {
                let ub_mp = &class_b[class_of[mp]];
                let b = &(&ub_m.adjoint() * &block(m, mp)) * ub_mp;
                let expected = if m == mp {
                    ComplexMatrix::from_real_diag(&sigma_m.real_diagonal())
                } else {
                    ComplexMatrix::zeros(d_b)
                };
                defect = defect.max(b.max_abs_diff(&expected));
                if m == mp {
                    weights[m] = b.real_diagonal();
                }
            }
        }
        Ok(Self {
            u_a,
            class_b,
            weights,
            common_b,
            special_form_defect: defect,
            d_b,
            class_of,
        })
    }

    /// Product frame `u_a (x) class_b[class]` as a unitary.
    pub fn frame(&self, class: usize) -> Result<ComplexMatrix> {
        Ok(linalg::kron(&self.u_a, &self.class_b[class])?)
    }

    /// Elements of `t1` in the frame of `class`.
    pub fn view(&self, t1: &ComplexMatrix, class: usize) -> Result<TElementView> {
        Ok(TElementView::from_rotated(t1.in_basis(&self.frame(class)?), self.d_b))
    }

    /// Elements of `t1` in the common product frame, if there is one.
    pub fn common_view(&self, t1: &ComplexMatrix) -> Result<Option<TElementView>> {
        match &self.common_b {
            Some(_) => Ok(Some(self.view(t1, 0)?)),
            None => Ok(None),
        }
    }

    pub fn class_of(&self, m: usize) -> usize {
        self.class_of[m]
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }
}

// A unitary diagonalizing every matrix in `family`, if they pairwise commute.
fn common_eigenbasis(family: &[ComplexMatrix], tol: f64) -> Result<Option<ComplexMatrix>> {
    let d = family[0].dim();
    for (i, a) in family.iter().enumerate() {
        for b in &family[i + 1..] {
            if linalg::commutator(a, b).max_norm() > tol {
                return Ok(None);
            }
        }
    }
    // A generic real combination separates the joint eigenspaces.
    let combo = family
        .iter()
        .enumerate()
        .fold(ComplexMatrix::zeros(d), |acc, (k, s)| {
            let w = 1.0 + (k as f64 + 1.0).sqrt() * 0.618_033_988_749_895;
            &acc + &s.scale_real(w)
        });
    let u = linalg::eig_hermitian(&combo)?.eigenvectors;
    for s in family {
        let rotated = s.in_basis(&u);
        let diag = ComplexMatrix::from_real_diag(&rotated.real_diagonal());
        if rotated.max_abs_diff(&diag) > tol.max(1e-12) {
            return Ok(None);
        }
    }
    Ok(Some(u))
}

/// Special-form version of condition 2, decided by constructing the
/// product eigenbasis and checking `rho` is diagonal in it with the same B
/// weights across each degeneracy class.
pub fn check_special_form(state: &BipartiteState, tol: f64) -> Result<bool> {
    check_special_form_with(state, &Tolerances::default(), tol)
}

pub fn check_special_form_with(state: &BipartiteState, tols: &Tolerances, tol: f64) -> Result<bool> {
    let adata = qstate::a_spectral_data(state, tols.kernel_tol, tols.degen_tol)?;
    Ok(ProductBasis::build(state, &adata, tol)?.special_form_defect <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TCriterion {
    pub t_mixes_kernel: bool,
    pub t_nontrivial_on_b: bool,
    pub witnesses: Vec<Witness>,
}

/// Condition 3, evaluated in the product eigenbasis.
pub fn check_t_criterion(
    t1: &ComplexMatrix,
    state: &BipartiteState,
    adata: &ASpectralData,
    tol: f64,
) -> Result<TCriterion> {
    let basis = ProductBasis::build(state, adata, tol)?;
    check_t_criterion_in(t1, state, adata, &basis, tol)
}

pub(crate) fn check_t_criterion_in(
    t1: &ComplexMatrix,
    state: &BipartiteState,
    adata: &ASpectralData,
    basis: &ProductBasis,
    tol: f64,
) -> Result<TCriterion> {
    if t1.dim() != state.matrix().dim() {
        return Err(CriteriaError::DimensionMismatch {
            expected: state.matrix().dim(),
            found: t1.dim(),
        });
    }
    let d_b = state.d_b();
    let mut witnesses = Vec::new();
    let mut mixes = false;
    let mut nontrivial = false;
    if adata.kernel.is_empty() {
        return Ok(TCriterion {
            t_mixes_kernel: false,
            t_nontrivial_on_b: false,
            witnesses,
        });
    }
    for (ci, class) in adata.classes.iter().enumerate() {
        if adata.is_kernel_class(ci) {
            continue;
        }
        let view = basis.view(t1, ci)?;
        for &m in class {
            let support: Vec<usize> = (0..d_b)
                .filter(|&mt| basis.weights[m][mt] > adata.kernel_tol)
                .collect();
            for &k in &adata.kernel {
                let mut largest = (0.0, 0, 0);
                for mt in 0..d_b {
                    for kt in 0..d_b {
                        let mag = view.element(m, mt, k, kt).norm();
                        if mag > largest.0 {
                            largest = (mag, mt, kt);
                        }
                    }
                }
                if largest.0 > tol {
                    mixes = true;
                    witnesses.push(Witness::KernelMixing {
                        m,
                        mt: largest.1,
                        k,
                        kt: largest.2,
                        magnitude: largest.0,
                    });
                }
                // off-diagonal elements on the support rows, and the spread
                // of the diagonal elements over the support
                let mut defect: f64 = 0.0;
                for &mt in &support {
                    for kt in (0..d_b).filter(|&kt| kt != mt) {
                        defect = defect.max(view.element(m, mt, k, kt).norm());
                    }
                    for &nt in &support {
                        let spread = view.element(m, mt, k, mt) - view.element(m, nt, k, nt);
                        defect = defect.max(spread.norm());
                    }
                }
                if defect > tol {
                    nontrivial = true;
                    witnesses.push(Witness::NontrivialOnB { m, k, defect });
                }
            }
        }
    }
    Ok(TCriterion {
        t_mixes_kernel: mixes,
        t_nontrivial_on_b: nontrivial,
        witnesses,
    })
}

pub fn classify(state: &BipartiteState, t1: &ComplexMatrix) -> Result<GuaranteeVerdict> {
    classify_with(state, t1, &Tolerances::default())
}

pub fn classify_with(
    state: &BipartiteState,
    t1: &ComplexMatrix,
    tols: &Tolerances,
) -> Result<GuaranteeVerdict> {
    let adata = qstate::a_spectral_data(state, tols.kernel_tol, tols.degen_tol)?;
    let (commutation_ok, mut witnesses) = check_commutation(state, &adata, tols.commutator_tol)?;
    let basis = ProductBasis::build(state, &adata, tols.commutator_tol)?;
    let t = check_t_criterion_in(t1, state, &adata, &basis, tols.commutator_tol)?;
    witnesses.extend(t.witnesses);
    Ok(GuaranteeVerdict::assemble(
        !adata.kernel.is_empty(),
        commutation_ok,
        t.t_mixes_kernel,
        t.t_nontrivial_on_b,
        witnesses,
    ))
}
