//! Closed-form perturbative predictions for the entropy change of A.
//!
//! With `rho_out = S rho S^dagger` and `S = 1 + i(lambda T1 + lambda^2 T2)`,
//! the reduced state moves by `lambda D1 + lambda^2 D2` where
//!
//! ```text
//! D1 = Tr_B i[T1, rho]
//! D2 = Tr_B ( (i/2)[T2 + T2^dagger, rho] - (1/2)[T1, [T1, rho]] )
//! ```
//!
//! Eigenvalue shifts follow from degenerate perturbation theory on the
//! blocks of `M = lambda D1 + lambda^2 (D2 + second-order mixing)` for each
//! degeneracy class of `rho_A`. The entropy change then has the expansion
//! `a lambda + b lambda^2 ln(1/lambda^2) + c lambda^2`:
//!
//! - `a` ([`first_order_entropy`]) vanishes whenever condition 2 holds;
//! - `b` ([`log_coefficient`]) is the total second-order shift of the
//!   kernel, non-negative under conditions 1 and 2;
//! - `c` ([`full_rank_second_order`]) is only predicted when `rho_A` has
//!   full rank, and has no definite sign.

use serde::Serialize;
use thiserror::Error;

use crate::criteria::{self, CriteriaError, ProductBasis};
use crate::linalg::{self, ComplexMatrix, LinalgError, C64, I};
use crate::qstate::{self, ASpectralData, BipartiteState, QStateError, NEAR_KERNEL_CEILING};
use crate::smatrix::{self, SMatrixError, TElementView, TMatrixPair};
use crate::Tolerances;

/// Agreement required between the two algebraic forms of the log coefficient.
pub const FORM_AGREEMENT_TOL: f64 = 1e-10;

/// Energy-conservation tolerance for the thermal formula.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("degeneracy class does not match the spectral data: {0}")]
    BasisMismatch(String),
    #[error("denominator {gap:.3e} between classes {class} and {other} is within the degeneracy tolerance")]
    DegeneracyLeak { class: usize, other: usize, gap: f64 },
    #[error("reduced eigenvalues {indices:?} lie between the kernel threshold and {NEAR_KERNEL_CEILING:e}")]
    IllConditionedSpectrum { indices: Vec<usize> },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("log-coefficient forms disagree: {summed} vs {expanded}")]
    FormDisagreement { summed: f64, expanded: f64 },
    #[error("T1 couples ({m},{mt}) -> ({mp},{mtp}) with energy mismatch {mismatch:.3e}")]
    EnergyViolation {
        m: usize,
        mt: usize,
        mp: usize,
        mtp: usize,
        mismatch: f64,
    },
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    State(#[from] QStateError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    SMatrix(#[from] SMatrixError),
}

pub type Result<T> = std::result::Result<T, PerturbError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Nonempty kernel, one non-kernel eigenvalue.
    KernelBranch,
    /// No kernel.
    FullRankBranch,
    /// Nonempty kernel and several distinct non-kernel eigenvalues.
    Mixed,
}

/// One degeneracy class of `rho_A` with its perturbation blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlock {
    pub indices: Vec<usize>,
    pub eigenvalue: f64,
    pub is_kernel: bool,
    /// lambda coefficient of M restricted to the class.
    pub first: ComplexMatrix,
    /// lambda^2 coefficient of M restricted to the class.
    pub second: ComplexMatrix,
}

impl ClassBlock {
    /// First- and second-order shifts of the eigenvalues in this class.
    ///
    /// The degenerate subspace is diagonalized with the first-order block
    /// when it splits the class, and with the second-order block otherwise.
    pub fn shifts(&self) -> Result<Vec<(f64, f64)>> {
        let scale = self.first.max_norm().max(self.second.max_norm()).max(1.0);
        if self.first.max_norm() <= 1e-13 * scale {
            let s = linalg::eig_hermitian(&self.second.hermitian_part())?;
            return Ok(s.eigenvalues.into_iter().map(|e| (0.0, e)).collect());
        }
        let s = linalg::eig_hermitian(&self.first.hermitian_part())?;
        let second = self.second.in_basis(&s.eigenvectors);
        Ok(s
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &e)| (e, second[(k, k)].re))
            .collect())
    }
}

/// Class-block structure of M.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMatrix {
    pub blocks: Vec<ClassBlock>,
}

impl PerturbationMatrix {
    pub fn kernel_block(&self) -> Option<&ClassBlock> {
        self.blocks.iter().find(|b| b.is_kernel)
    }

    pub fn shift_table(&self) -> Result<Vec<EigenShift>> {
        let mut out = Vec::new();
        for (class, b) in self.blocks.iter().enumerate() {
            for (k, (first, second)) in b.shifts()?.into_iter().enumerate() {
                out.push(EigenShift {
                    class,
                    index: b.indices[k],
                    eigenvalue: b.eigenvalue,
                    first_order: first,
                    second_order: second,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenShift {
    pub class: usize,
    pub index: usize,
    pub eigenvalue: f64,
    pub first_order: f64,
    pub second_order: f64,
}

/// `U_A^dagger Tr_B(X) U_A`.
fn reduced_in_eigenbasis(x: &ComplexMatrix, state: &BipartiteState, adata: &ASpectralData) -> Result<ComplexMatrix> {
    let r = linalg::partial_trace_b(x, state.d_a(), state.d_b())?;
    Ok(r.in_basis(&adata.eigenvectors))
}

fn first_order_reduced(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData) -> Result<ComplexMatrix> {
    let c = linalg::commutator(t1, state.matrix()).scale(I);
    reduced_in_eigenbasis(&c, state, adata)
}

fn check_class(adata: &ASpectralData, class: &[usize]) -> Result<()> {
    if class.is_empty() || !adata.classes.iter().any(|c| c.as_slice() == class) {
        return Err(PerturbError::BasisMismatch(format!(
            "{class:?} is not one of {:?}",
            adata.classes
        )));
    }
    Ok(())
}

fn check_dims(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData) -> Result<()> {
    if adata.dim() != state.d_a() || t1.dim() != state.matrix().dim() {
        return Err(PerturbError::BasisMismatch(format!(
            "state {}x{}, spectral data {}, T1 {}",
            state.d_a(),
            state.d_b(),
            adata.dim(),
            t1.dim()
        )));
    }
    Ok(())
}

/// First-order change of `rho_A` on one degeneracy class, in the eigenbasis
/// of `rho_A`: entries `i Tr(T1 [rho, |m><m'| (x) 1_B])` up to transposition.
pub fn delta_rho_a_first(
    state: &BipartiteState,
    t1: &ComplexMatrix,
    adata: &ASpectralData,
    class: &[usize],
) -> Result<ComplexMatrix> {
    check_dims(state, t1, adata)?;
    check_class(adata, class)?;
    Ok(first_order_reduced(state, t1, adata)?.submatrix(class))
}

pub fn perturbation_matrix(
    state: &BipartiteState,
    pair: &TMatrixPair,
    adata: &ASpectralData,
) -> Result<PerturbationMatrix> {
    check_dims(state, &pair.t1, adata)?;
    let rho = state.matrix();
    let d1 = first_order_reduced(state, &pair.t1, adata)?;
    let h2 = &pair.t2 + &pair.t2.adjoint();
    let inner = linalg::commutator(&pair.t1, rho);
    let second_full = &linalg::commutator(&h2, rho).scale(I * 0.5)
        - &linalg::commutator(&pair.t1, &inner).scale_real(0.5);
    let d2 = reduced_in_eigenbasis(&second_full, state, adata)?;

    let mut blocks = Vec::with_capacity(adata.classes.len());
    for (ci, class) in adata.classes.iter().enumerate() {
        let p = adata.class_value(ci);
        let mut second = d2.submatrix(class);
        for (cj, other) in adata.classes.iter().enumerate() {
            if cj == ci {
                continue;
            }
            let gap = p - adata.class_value(cj);
            if gap.abs() <= adata.degen_tol {
                return Err(PerturbError::DegeneracyLeak {
                    class: ci,
                    other: cj,
                    gap,
                });
            }
            for (a, &m) in class.iter().enumerate() {
                for (b, &mp) in class.iter().enumerate() {
                    let s: C64 = other.iter().map(|&q| d1[(m, q)] * d1[(q, mp)]).sum();
                    second[(a, b)] += s / gap;
                }
            }
        }
        blocks.push(ClassBlock {
            indices: class.clone(),
            eigenvalue: p,
            is_kernel: adata.is_kernel_class(ci),
            first: d1.submatrix(class),
            second,
        });
    }
    Ok(PerturbationMatrix { blocks })
}

fn require_well_conditioned(adata: &ASpectralData) -> Result<()> {
    let near = adata.near_kernel();
    if !near.is_empty() {
        return Err(PerturbError::IllConditionedSpectrum { indices: near });
    }
    Ok(())
}

/// Coefficient of lambda in the entropy change.
pub fn first_order_entropy(state: &BipartiteState, t1: &ComplexMatrix) -> Result<f64> {
    first_order_entropy_with(state, t1, &Tolerances::default())
}

pub fn first_order_entropy_with(state: &BipartiteState, t1: &ComplexMatrix, tols: &Tolerances) -> Result<f64> {
    let adata = qstate::a_spectral_data(state, tols.kernel_tol, tols.degen_tol)?;
    first_order_entropy_in(state, t1, &adata)
}

pub(crate) fn first_order_entropy_in(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData) -> Result<f64> {
    check_dims(state, t1, adata)?;
    require_well_conditioned(adata)?;
    let d1 = first_order_reduced(state, t1, adata)?;
    let mut total = 0.0;
    for (ci, class) in adata.classes.iter().enumerate() {
        if adata.is_kernel_class(ci) {
            continue;
        }
        let log_factor = adata.class_value(ci).ln() + 1.0;
        let shifts = linalg::eig_hermitian(&d1.submatrix(class).hermitian_part())?.eigenvalues;
        total -= shifts.iter().sum::<f64>() * log_factor;
    }
    Ok(total)
}

fn require_commutation(state: &BipartiteState, adata: &ASpectralData, tols: &Tolerances) -> Result<()> {
    let (ok, w) = criteria::check_commutation(state, adata, tols.commutator_tol)?;
    if !ok {
        return Err(PerturbError::PreconditionViolated(format!(
            "incoming state does not commute with the reduced eigenprojectors ({} witnesses)",
            w.len()
        )));
    }
    Ok(())
}

/// Both evaluations of the log coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogCoefficientForms {
    /// Sum of squared moduli, manifestly non-negative.
    pub summed_squares: f64,
    /// Transition probabilities minus the over-counting correction.
    pub expanded: f64,
}

/// Coefficient of `lambda^2 ln(1/lambda^2)`; requires conditions 1 and 2.
pub fn log_coefficient(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData) -> Result<f64> {
    let forms = log_coefficient_forms(state, t1, adata, &tolerances_of(adata))?;
    if (forms.summed_squares - forms.expanded).abs() > FORM_AGREEMENT_TOL {
        return Err(PerturbError::FormDisagreement {
            summed: forms.summed_squares,
            expanded: forms.expanded,
        });
    }
    Ok(forms.summed_squares)
}

fn tolerances_of(adata: &ASpectralData) -> Tolerances {
    Tolerances {
        kernel_tol: adata.kernel_tol,
        degen_tol: adata.degen_tol,
        ..Tolerances::default()
    }
}

pub fn log_coefficient_forms(
    state: &BipartiteState,
    t1: &ComplexMatrix,
    adata: &ASpectralData,
    tols: &Tolerances,
) -> Result<LogCoefficientForms> {
    check_dims(state, t1, adata)?;
    if adata.kernel.is_empty() {
        return Err(PerturbError::PreconditionViolated("reduced state has an empty kernel".into()));
    }
    require_commutation(state, adata, tols)?;
    let basis = ProductBasis::build(state, adata, tols.commutator_tol)?;
    let d_b = state.d_b();
    let mut summed = 0.0;
    let mut expanded = 0.0;
    for (ci, class) in adata.classes.iter().enumerate() {
        if adata.is_kernel_class(ci) {
            continue;
        }
        let view = basis.view(t1, ci)?;
        for &m in class {
            let w = &basis.weights[m];
            let p_m: f64 = w.iter().sum();
            for &k in &adata.kernel {
                let x: C64 = (0..d_b).map(|n| view.element(m, n, k, n) * w[n]).sum::<C64>() / p_m;
                for (mt, &wt) in w.iter().enumerate() {
                    for kt in 0..d_b {
                        let t = view.element(m, mt, k, kt);
                        let shifted = if mt == kt { t - x } else { t };
                        summed += wt * shifted.norm_sqr();
                        expanded += wt * t.norm_sqr();
                    }
                }
                let mut correction = 0.0;
                for mt in 0..d_b {
                    for mtp in 0..d_b {
                        let term = view.element(m, mt, k, mt) * view.element(m, mtp, k, mtp).conj();
                        correction += w[mtp] * w[mt] / p_m * term.re;
                    }
                }
                expanded -= correction;
            }
        }
    }
    Ok(LogCoefficientForms {
        summed_squares: summed,
        expanded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FullRankRoute {
    /// Element formula in a common product eigenbasis.
    ProductElements,
    /// Trace of the class blocks of M; used when no common B basis exists.
    ClassBlocks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullRankResult {
    /// Coefficient of lambda^2.
    pub value: f64,
    /// Pairs `(m, m')`, `m != m'`, dropped because their eigenvalues are equal.
    pub excluded_pairs: Vec<(usize, usize)>,
    pub route: FullRankRoute,
}

fn ordered_pairs_within_classes(adata: &ASpectralData) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for c in &adata.classes {
        for &m in c {
            for &mp in c {
                if m != mp {
                    out.push((m, mp));
                }
            }
        }
    }
    out
}

/// Coefficient of lambda^2 for a full-rank reduced state satisfying
/// condition 2.
pub fn full_rank_second_order(
    state: &BipartiteState,
    t1: &ComplexMatrix,
    adata: &ASpectralData,
) -> Result<FullRankResult> {
    full_rank_second_order_with(state, t1, adata, &tolerances_of(adata))
}

pub fn full_rank_second_order_with(
    state: &BipartiteState,
    t1: &ComplexMatrix,
    adata: &ASpectralData,
    tols: &Tolerances,
) -> Result<FullRankResult> {
    check_dims(state, t1, adata)?;
    if !adata.kernel.is_empty() {
        return Err(PerturbError::PreconditionViolated(format!(
            "reduced state has kernel {:?}",
            adata.kernel
        )));
    }
    require_commutation(state, adata, tols)?;
    let basis = ProductBasis::build(state, adata, tols.commutator_tol)?;
    let excluded_pairs = ordered_pairs_within_classes(adata);
    match basis.common_view(t1)? {
        Some(view) => Ok(FullRankResult {
            value: pair_sum(&view, &basis, adata, |_, _| true),
            excluded_pairs,
            route: FullRankRoute::ProductElements,
        }),
        None => Ok(FullRankResult {
            value: full_rank_from_blocks(state, t1, adata)?,
            excluded_pairs,
            route: FullRankRoute::ClassBlocks,
        }),
    }
}

/// `(1/2) sum ln(p_m/p_m') (rho_{m,mt} - rho_{m',mt'}) |T - delta Y|^2` over
/// pairs in different classes accepted by `keep`.
fn pair_sum(
    view: &TElementView,
    basis: &ProductBasis,
    adata: &ASpectralData,
    keep: impl Fn(usize, usize) -> bool,
) -> f64 {
    let d_a = adata.dim();
    let d_b = basis.d_b();
    let w = &basis.weights;
    let p: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let mut total = 0.0;
    for m in 0..d_a {
        for mp in 0..d_a {
            if basis.class_of(m) == basis.class_of(mp) || !keep(m, mp) {
                continue;
            }
            let log_ratio = (p[m] / p[mp]).ln();
            let y: C64 = (0..d_b)
                .map(|n| view.element(m, n, mp, n) * (w[m][n] - w[mp][n]))
                .sum::<C64>()
                / (p[m] - p[mp]);
            for mt in 0..d_b {
                for mtp in 0..d_b {
                    let t = view.element(m, mt, mp, mtp);
                    let shifted = if mt == mtp { t - y } else { t };
                    total += log_ratio * (w[m][mt] - w[mp][mtp]) * shifted.norm_sqr();
                }
            }
        }
    }
    0.5 * total
}

/// `-sum_C (ln p_C + 1) tr M2_C`, basis-free.
pub fn full_rank_from_blocks(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData) -> Result<f64> {
    let pair = smatrix::complete_second_order(t1, &ComplexMatrix::zeros(t1.dim()), state.d_a(), state.d_b())?;
    let pm = perturbation_matrix(state, &pair, adata)?;
    Ok(pm
        .blocks
        .iter()
        .filter(|b| !b.is_kernel)
        .map(|b| -(b.eigenvalue.ln() + 1.0) * b.second.trace().re)
        .sum())
}

/// Full-rank pair formula restricted to non-kernel pairs, for the mixed
/// branch. `None` when no common product basis exists.
pub fn nonkernel_pair_coefficient(
    state: &BipartiteState,
    t1: &ComplexMatrix,
    adata: &ASpectralData,
    tols: &Tolerances,
) -> Result<Option<f64>> {
    check_dims(state, t1, adata)?;
    require_commutation(state, adata, tols)?;
    let basis = ProductBasis::build(state, adata, tols.commutator_tol)?;
    Ok(basis
        .common_view(t1)?
        .map(|view| pair_sum(&view, &basis, adata, |m, mp| !adata.is_kernel(m) && !adata.is_kernel(mp))))
}

/// |sum_m of the second-order eigenvalue shifts|, which must vanish.
pub fn trace_identity_check(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData) -> Result<f64> {
    check_dims(state, t1, adata)?;
    let tols = tolerances_of(adata);
    if !adata.kernel.is_empty() {
        return Err(PerturbError::PreconditionViolated(format!(
            "reduced state has kernel {:?}",
            adata.kernel
        )));
    }
    require_commutation(state, adata, &tols)?;
    let basis = ProductBasis::build(state, adata, tols.commutator_tol)?;
    let Some(view) = basis.common_view(t1)? else {
        let pair = smatrix::complete_second_order(t1, &ComplexMatrix::zeros(t1.dim()), state.d_a(), state.d_b())?;
        let pm = perturbation_matrix(state, &pair, adata)?;
        return Ok(pm.blocks.iter().map(|b| b.second.trace().re).sum::<f64>().abs());
    };
    let d_a = adata.dim();
    let d_b = state.d_b();
    let w = &basis.weights;
    let p: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let mut total = 0.0;
    for m in 0..d_a {
        for mp in 0..d_a {
            for mt in 0..d_b {
                for mtp in 0..d_b {
                    total += (w[m][mt] - w[mp][mtp]) * view.element(m, mt, mp, mtp).norm_sqr();
                }
            }
            if basis.class_of(m) != basis.class_of(mp) {
                let s: C64 = (0..d_b)
                    .map(|n| (w[m][n] - w[mp][n]) * view.element(m, n, mp, n))
                    .sum();
                total -= s.norm_sqr() / (p[m] - p[mp]);
            }
        }
    }
    Ok(total.abs())
}

/// lambda^2 coefficient for `rho = thermal(E_A, beta) (x) |b><b|` with an
/// energy-conserving T1, in the standard product basis:
/// `-beta sum_m p_m sum_{m', mt'} (E_B[mt'] - E_B[b]) |<m,b|T1|m',mt'>|^2`.
pub fn thermal_delta_s(
    a_energies: &[f64],
    beta: f64,
    b_index: usize,
    b_energies: &[f64],
    t1: &ComplexMatrix,
) -> Result<f64> {
    let (d_a, d_b) = (a_energies.len(), b_energies.len());
    if t1.dim() != d_a * d_b || b_index >= d_b {
        return Err(PerturbError::BasisMismatch(format!(
            "T1 of dimension {} for {d_a} x {d_b} energies, B index {b_index}",
            t1.dim()
        )));
    }
    let scale = t1.max_norm().max(1.0);
    for r in 0..d_a * d_b {
        for c in 0..d_a * d_b {
            if t1[(r, c)].norm() <= 1e-12 * scale {
                continue;
            }
            let (m, mt, mp, mtp) = (r / d_b, r % d_b, c / d_b, c % d_b);
            let mismatch = a_energies[m] + b_energies[mt] - a_energies[mp] - b_energies[mtp];
            if mismatch.abs() > ENERGY_TOL {
                return Err(PerturbError::EnergyViolation {
                    m,
                    mt,
                    mp,
                    mtp,
                    mismatch,
                });
            }
        }
    }
    let e0 = a_energies.iter().copied().fold(f64::INFINITY, f64::min);
    let boltz: Vec<f64> = a_energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = boltz.iter().sum();
    let mut total = 0.0;
    for m in 0..d_a {
        let p = boltz[m] / z;
        for mp in 0..d_a {
            for mtp in 0..d_b {
                let t = t1[(m * d_b + b_index, mp * d_b + mtp)];
                total += p * (b_energies[mtp] - b_energies[b_index]) * t.norm_sqr();
            }
        }
    }
    Ok(-beta * total)
}

/// All perturbative coefficients for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbativePrediction {
    /// Coefficient of lambda; absent when the spectrum is ill-conditioned.
    pub order1_coeff: Option<f64>,
    /// Coefficient of lambda^2 ln(1/lambda^2); zero on the full-rank branch,
    /// absent when condition 2 fails.
    pub log_coeff: Option<f64>,
    /// Coefficient of lambda^2, full-rank branch only.
    pub order2_coeff: Option<f64>,
    /// Mixed branch: the lambda^2 pair contributions among non-kernel states.
    pub nonkernel_pair_coeff: Option<f64>,
    pub branch: Branch,
    pub commutation_ok: bool,
    pub shifts: Vec<EigenShift>,
    pub excluded_pairs: Vec<(usize, usize)>,
    pub notes: Vec<String>,
    /// Reading with near-zero eigenvalues treated as kernel, when the
    /// spectrum has eigenvalues in `(kernel_tol, NEAR_KERNEL_CEILING)`.
    pub alternative: Option<Box<PerturbativePrediction>>,
}

pub fn predict(state: &BipartiteState, pair: &TMatrixPair, tols: &Tolerances) -> Result<PerturbativePrediction> {
    let adata = qstate::a_spectral_data(state, tols.kernel_tol, tols.degen_tol)?;
    let mut pred = predict_in(state, pair, &adata, tols)?;
    if !adata.near_kernel().is_empty() {
        let alt_tols = Tolerances {
            kernel_tol: NEAR_KERNEL_CEILING,
            ..*tols
        };
        let alt_data = qstate::a_spectral_data(state, alt_tols.kernel_tol, alt_tols.degen_tol)?;
        pred.notes.push(format!(
            "eigenvalues {:?} are near zero; alternative reading treats them as kernel",
            adata.near_kernel()
        ));
        pred.alternative = Some(Box::new(predict_in(state, pair, &alt_data, &alt_tols)?));
    }
    Ok(pred)
}

fn predict_in(
    state: &BipartiteState,
    pair: &TMatrixPair,
    adata: &ASpectralData,
    tols: &Tolerances,
) -> Result<PerturbativePrediction> {
    let t1 = &pair.t1;
    let mut notes = Vec::new();
    let nonkernel_classes = (0..adata.classes.len()).filter(|&c| !adata.is_kernel_class(c)).count();
    let branch = match (adata.kernel.is_empty(), nonkernel_classes) {
        (true, _) => Branch::FullRankBranch,
        (false, 1) => Branch::KernelBranch,
        (false, _) => Branch::Mixed,
    };
    let order1_coeff = match first_order_entropy_in(state, t1, adata) {
        Ok(v) => Some(v),
        Err(PerturbError::IllConditionedSpectrum { indices }) => {
            notes.push(format!("first-order coefficient withheld: near-zero eigenvalues {indices:?}"));
            None
        }
        Err(e) => return Err(e),
    };
    let (commutation_ok, _) = criteria::check_commutation(state, adata, tols.commutator_tol)?;
    let mut log_coeff = None;
    let mut order2_coeff = None;
    let mut nonkernel_pair_coeff = None;
    let mut excluded_pairs = Vec::new();
    if commutation_ok {
        match branch {
            Branch::FullRankBranch => {
                log_coeff = Some(0.0);
                let fr = full_rank_second_order_with(state, t1, adata, tols)?;
                excluded_pairs = fr.excluded_pairs;
                order2_coeff = Some(fr.value);
            }
            Branch::KernelBranch | Branch::Mixed => {
                let forms = log_coefficient_forms(state, t1, adata, tols)?;
                if (forms.summed_squares - forms.expanded).abs() > FORM_AGREEMENT_TOL {
                    return Err(PerturbError::FormDisagreement {
                        summed: forms.summed_squares,
                        expanded: forms.expanded,
                    });
                }
                log_coeff = Some(forms.summed_squares);
                if branch == Branch::Mixed {
                    nonkernel_pair_coeff = nonkernel_pair_coefficient(state, t1, adata, tols)?;
                    if nonkernel_pair_coeff.is_none() {
                        notes.push("no common product basis; non-kernel pair coefficient not evaluated".into());
                    }
                }
            }
        }
    } else {
        notes.push("state fails the commutation condition; second-order closed forms do not apply".into());
    }
    let pm = perturbation_matrix(state, pair, adata)?;
    Ok(PerturbativePrediction {
        order1_coeff,
        log_coeff,
        order2_coeff,
        nonkernel_pair_coeff,
        branch,
        commutation_ok,
        shifts: pm.shift_table()?,
        excluded_pairs,
        notes,
        alternative: None,
    })
}

// `Tr(T1 [rho, |m><m'| (x) 1_B])` evaluated literally; test-only cross-check
// of the partial-trace route.
#[cfg(test)]
fn first_order_element_by_trace(state: &BipartiteState, t1: &ComplexMatrix, adata: &ASpectralData, m: usize, mp: usize) -> C64 {
    let op = linalg::kron(
        &ComplexMatrix::outer(&adata.eigenvector(m), &adata.eigenvector(mp)),
        &ComplexMatrix::identity(state.d_b()),
    )
    .unwrap();
    let c = linalg::commutator(state.matrix(), &op);
    (t1 * &c).trace() * I
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, ZERO};
    use crate::qstate::{a_spectral_data, reduced_a, DensityMatrix};
    use crate::smatrix::{complete_second_order, random_hermitian, structured_t1, ScenarioTSpec, TElement};

    fn ad(st: &BipartiteState) -> ASpectralData {
        a_spectral_data(st, 1e-12, 1e-9).unwrap()
    }

    fn el(m: usize, mt: usize, mp: usize, mtp: usize, v: C64) -> TElement {
        TElement { m, mt, mp, mtp, value: v }
    }

    fn real(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn two_level_product(x: f64, y: f64) -> BipartiteState {
        BipartiteState::diagonal(&[vec![x * y, x * (1.0 - y)], vec![(1.0 - x) * y, (1.0 - x) * (1.0 - y)]]).unwrap()
    }

    fn exchange(t: f64) -> ComplexMatrix {
        structured_t1(&ScenarioTSpec { d_a: 2, d_b: 2, elements: vec![el(0, 1, 1, 0, real(t))] }).unwrap()
    }

    fn exact_reduced_eigs(st: &BipartiteState, t1: &ComplexMatrix, lambda: f64) -> Vec<f64> {
        let s = smatrix::exact_s(t1, lambda).unwrap();
        let out = BipartiteState::from_matrix(st.matrix().conjugate_by(&s), st.d_a(), st.d_b()).unwrap();
        reduced_a(&out).unwrap().eigenvalues().to_vec()
    }

    fn exact_entropy_change(st: &BipartiteState, t1: &ComplexMatrix, lambda: f64) -> f64 {
        let before = qstate::entropy_from_eigenvalues(reduced_a(st).unwrap().eigenvalues(), 0.0);
        qstate::entropy_from_eigenvalues(&exact_reduced_eigs(st, t1, lambda), 0.0) - before
    }

    fn bell_type(p: f64) -> BipartiteState {
        BipartiteState::pure(&[real(p.sqrt()), ZERO, ZERO, real((1.0 - p).sqrt())], 2, 2).unwrap()
    }

    #[test]
    fn first_order_block_vanishes_under_commutation() {
        let st = BipartiteState::diagonal(&[vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        let a = ad(&st);
        for seed in 0..5 {
            let t1 = random_hermitian(4, seed);
            for class in &a.classes {
                assert!(delta_rho_a_first(&st, &t1, &a, class).unwrap().max_norm() < 1e-12);
            }
        }
        let zero = ComplexMatrix::zeros(4);
        let b = bell_type(0.5);
        let ab = ad(&b);
        assert!(delta_rho_a_first(&b, &zero, &ab, &ab.classes[0]).unwrap().max_norm() == 0.0);
        assert!(matches!(
            delta_rho_a_first(&st, &zero, &a, &[0, 1]),
            Err(PerturbError::BasisMismatch(_))
        ));
    }

    #[test]
    fn first_order_block_matches_trace_formula_and_finite_difference() {
        let b = bell_type(0.5);
        let a = ad(&b);
        let t1 = random_hermitian(4, 3);
        let block = delta_rho_a_first(&b, &t1, &a, &a.classes[0]).unwrap();
        assert!(block.max_norm() > 1e-3);
        for (i, &m) in a.classes[0].iter().enumerate() {
            for (j, &mp) in a.classes[0].iter().enumerate() {
                // the trace form is the transpose of the partial-trace form
                let lit = first_order_element_by_trace(&b, &t1, &a, m, mp);
                assert!((lit - block[(j, i)]).norm() < 1e-13);
            }
        }
        let shifts = linalg::eig_hermitian(&block).unwrap().eigenvalues;
        let h = 1e-5;
        let e0 = exact_reduced_eigs(&b, &t1, 0.0);
        let e1 = exact_reduced_eigs(&b, &t1, h);
        for k in 0..2 {
            let fd = (e1[k] - e0[k]) / h;
            assert!((fd - shifts[k]).abs() < 1e-4 * shifts[k].abs().max(1.0), "{fd} vs {}", shifts[k]);
        }
    }

    #[test]
    fn perturbation_matrix_zero_and_kernel_block() {
        let st = BipartiteState::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let a = ad(&st);
        let z = ComplexMatrix::zeros(4);
        let pair = complete_second_order(&z, &z, 2, 2).unwrap();
        let pm = perturbation_matrix(&st, &pair, &a).unwrap();
        assert!(pm.blocks.iter().all(|b| b.first.max_norm() == 0.0 && b.second.max_norm() == 0.0));

        // <0,0|T|1,1> = t: the kernel eigenvalue shifts by t^2 at second order
        let t = 0.7;
        let t1 = structured_t1(&ScenarioTSpec { d_a: 2, d_b: 2, elements: vec![el(0, 0, 1, 1, real(t))] }).unwrap();
        let pair = complete_second_order(&t1, &z, 2, 2).unwrap();
        let pm = perturbation_matrix(&st, &pair, &a).unwrap();
        let kb = pm.kernel_block().unwrap();
        assert!(kb.first.max_norm() < 1e-15);
        assert!((kb.second[(0, 0)].re - t * t).abs() < 1e-14);
        assert!((log_coefficient(&st, &t1, &a).unwrap() - t * t).abs() < 1e-14);
    }

    #[test]
    fn perturbation_matrix_matches_exact_shifts() {
        let rho_b = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let rho_a = DensityMatrix::diagonal(&[0.5, 0.3, 0.2, 0.0]).unwrap();
        let st = BipartiteState::product(&rho_a, &rho_b).unwrap();
        let a = ad(&st);
        let t1 = random_hermitian(8, 17);
        let pair = complete_second_order(&t1, &ComplexMatrix::zeros(8), 4, 2).unwrap();
        let pm = perturbation_matrix(&st, &pair, &a).unwrap();
        let lambda = 1e-4;
        let exact = exact_reduced_eigs(&st, &t1, lambda);
        let mut predicted: Vec<f64> = pm
            .shift_table()
            .unwrap()
            .iter()
            .map(|s| s.eigenvalue + lambda * s.first_order + lambda * lambda * s.second_order)
            .collect();
        predicted.sort_by(f64::total_cmp);
        for k in 0..4 {
            let shift_exact = exact[k] - a.eigenvalues[k];
            let shift_pred = predicted[k] - a.eigenvalues[k];
            assert!(
                (shift_exact - shift_pred).abs() <= 1e-3 * shift_exact.abs(),
                "{k}: {shift_exact:e} vs {shift_pred:e}"
            );
        }
    }

    #[test]
    fn first_order_entropy_examples() {
        let st = BipartiteState::diagonal(&[vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        for seed in 0..10 {
            assert!(first_order_entropy(&st, &random_hermitian(4, seed)).unwrap().abs() < 1e-12);
        }
        let b = bell_type(0.8);
        let t1 = structured_t1(&ScenarioTSpec { d_a: 2, d_b: 2, elements: vec![el(0, 0, 1, 1, C64::new(0.0, 0.5))] }).unwrap();
        let a1 = first_order_entropy(&b, &t1).unwrap();
        assert!(a1.abs() > 0.1);
        assert_eq!(first_order_entropy(&b, &t1.scale_real(-1.0)).unwrap(), -a1);
        let h = 1e-5;
        let slope = (exact_entropy_change(&b, &t1, h) - exact_entropy_change(&b, &t1, -h)) / (2.0 * h);
        assert!((slope - a1).abs() <= 1e-3 * a1.abs(), "{slope} vs {a1}");
    }

    #[test]
    fn first_order_entropy_rejects_near_kernel_spectrum() {
        let st = BipartiteState::diagonal(&[vec![1.0 - 1e-8], vec![1e-8]]).unwrap();
        assert!(matches!(
            first_order_entropy(&st, &random_hermitian(2, 1)),
            Err(PerturbError::IllConditionedSpectrum { .. })
        ));
    }

    #[test]
    fn log_coefficient_examples() {
        // pure |0,0>: total transition probability into states where both
        // subsystems change
        let st = BipartiteState::diagonal(&[vec![1.0, 0.0, 0.0], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        let a = ad(&st);
        let t1 = random_hermitian(9, 4);
        let direct: f64 = (1..3)
            .flat_map(|m| (1..3).map(move |mt| (m, mt)))
            .map(|(m, mt)| t1[(0, m * 3 + mt)].norm_sqr())
            .sum();
        assert!((log_coefficient(&st, &t1, &a).unwrap() - direct).abs() < 1e-13);

        let ha = random_hermitian(3, 5);
        let local = kron(&ha, &ComplexMatrix::identity(3)).unwrap();
        assert!(log_coefficient(&st, &local, &a).unwrap().abs() < 1e-12);

        let two = BipartiteState::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let t = C64::new(0.3, -0.4);
        let t1 = structured_t1(&ScenarioTSpec { d_a: 2, d_b: 2, elements: vec![el(0, 0, 1, 1, t)] }).unwrap();
        assert!((log_coefficient(&two, &t1, &ad(&two)).unwrap() - t.norm_sqr()).abs() < 1e-15);

        let full = two_level_product(0.6, 0.3);
        assert!(matches!(
            log_coefficient(&full, &exchange(1.0), &ad(&full)),
            Err(PerturbError::PreconditionViolated(_))
        ));
        let b = bell_type(0.5);
        assert!(log_coefficient(&b, &exchange(1.0), &ad(&b)).is_err());
    }

    #[test]
    fn log_coefficient_forms_agree_and_are_non_negative() {
        for seed in 0..50u64 {
            let st = BipartiteState::diagonal(&[
                vec![0.2, 0.1, 0.05],
                vec![0.0, 0.3, 0.35],
                vec![0.0, 0.0, 0.0],
            ])
            .unwrap();
            let a = ad(&st);
            let f = log_coefficient_forms(&st, &random_hermitian(9, seed), &a, &Tolerances::default()).unwrap();
            assert!((f.summed_squares - f.expanded).abs() < 1e-10);
            assert!(f.summed_squares >= 0.0);
        }
    }

    #[test]
    fn full_rank_two_level_closed_forms() {
        let t = 0.9;
        for (x, y) in [(0.75, 0.0), (0.75, 0.5), (0.6, 1.0), (0.3, 0.2)] {
            let st = two_level_product(x, y);
            let r = full_rank_second_order(&st, &exchange(t), &ad(&st)).unwrap();
            let closed = t * t * (x / (1.0 - x)).ln() * (x * (1.0 - y) - (1.0 - x) * y);
            assert!((r.value - closed).abs() < 1e-13, "{x} {y}: {} vs {closed}", r.value);
            assert_eq!(r.route, FullRankRoute::ProductElements);
        }
        // with both pairs (1,1)<->(2,2) and (1,2)<->(2,1) the y dependence cancels
        let both = structured_t1(&ScenarioTSpec {
            d_a: 2,
            d_b: 2,
            elements: vec![el(0, 0, 1, 1, real(t)), el(0, 1, 1, 0, real(t))],
        })
        .unwrap();
        for y in [0.0, 0.4, 1.0] {
            let st = two_level_product(0.75, y);
            let r = full_rank_second_order(&st, &both, &ad(&st)).unwrap();
            let closed = t * t * 3f64.ln() * (2.0 * 0.75 - 1.0);
            assert!((r.value - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn full_rank_sign_change_in_y() {
        let x = 0.75;
        let vals: Vec<f64> = (0..=20)
            .map(|k| {
                let st = two_level_product(x, k as f64 / 20.0);
                full_rank_second_order(&st, &exchange(1.0), &ad(&st)).unwrap().value
            })
            .collect();
        assert!(vals[0] > 0.0 && vals[20] < 0.0);
        assert!(vals[15].abs() < 1e-14);
        assert!(vals[14] > 0.0 && vals[16] < 0.0);
    }

    #[test]
    fn full_rank_routes_agree() {
        for seed in 0..20u64 {
            let st = BipartiteState::diagonal(&[vec![0.1, 0.2, 0.05], vec![0.15, 0.05, 0.05], vec![0.3, 0.07, 0.03]]).unwrap();
            let a = ad(&st);
            let t1 = random_hermitian(9, seed);
            let elem = full_rank_second_order(&st, &t1, &a).unwrap().value;
            let blocks = full_rank_from_blocks(&st, &t1, &a).unwrap();
            assert!((elem - blocks).abs() < 1e-10 * (1.0 + elem.abs()), "{elem} vs {blocks}");
        }
    }

    #[test]
    fn full_rank_excludes_degenerate_pairs_and_matches_oracle() {
        // rho_A = diag(0.5, 0.25, 0.25): the degenerate pair is dropped
        let st = BipartiteState::diagonal(&[vec![0.3, 0.2], vec![0.15, 0.1], vec![0.15, 0.1]]).unwrap();
        let a = ad(&st);
        let t1 = random_hermitian(6, 8);
        let r = full_rank_second_order(&st, &t1, &a).unwrap();
        assert_eq!(r.excluded_pairs.len(), 2);
        let lambda = 1e-4;
        let ds = exact_entropy_change(&st, &t1, lambda) / (lambda * lambda);
        assert!((ds - r.value).abs() < 1e-3 * r.value.abs().max(0.1), "{ds} vs {}", r.value);
    }

    #[test]
    fn full_rank_without_common_basis_uses_blocks() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = ComplexMatrix::outer(&[real(h), real(h)], &[real(h), real(h)]);
        let mixed_b = &plus.scale_real(0.8) + &ComplexMatrix::identity(2).scale_real(0.1);
        let zero_b = ComplexMatrix::from_real_diag(&[0.7, 0.3]);
        let m = &kron(&ComplexMatrix::from_real_diag(&[0.6, 0.0]), &mixed_b).unwrap()
            + &kron(&ComplexMatrix::from_real_diag(&[0.0, 0.4]), &zero_b).unwrap();
        let st = BipartiteState::from_matrix(m, 2, 2).unwrap();
        let a = ad(&st);
        let t1 = random_hermitian(4, 2);
        let r = full_rank_second_order(&st, &t1, &a).unwrap();
        assert_eq!(r.route, FullRankRoute::ClassBlocks);
        let lambda = 1e-4;
        let ds = exact_entropy_change(&st, &t1, lambda) / (lambda * lambda);
        assert!((ds - r.value).abs() < 1e-3 * r.value.abs().max(0.1), "{ds} vs {}", r.value);
        assert!(trace_identity_check(&st, &t1, &a).unwrap() < 1e-10);
    }

    #[test]
    fn unitary_on_a_is_null() {
        let st = BipartiteState::diagonal(&[vec![0.1, 0.3], vec![0.4, 0.2]]).unwrap();
        let local = kron(&random_hermitian(2, 1), &ComplexMatrix::identity(2)).unwrap();
        let r = full_rank_second_order(&st, &local, &ad(&st)).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn trace_identity_examples() {
        let st = two_level_product(0.7, 0.2);
        let a = ad(&st);
        assert_eq!(trace_identity_check(&st, &ComplexMatrix::zeros(4), &a).unwrap(), 0.0);
        for seed in 0..20 {
            assert!(trace_identity_check(&st, &random_hermitian(4, seed), &a).unwrap() < 1e-12);
        }
    }

    fn thermal_setup(b_index: usize) -> (Vec<f64>, Vec<f64>, f64, ComplexMatrix, BipartiteState) {
        let ea = vec![0.0, 1.0, 2.0];
        let eb = vec![0.0, 1.0];
        let beta = 0.8;
        // A drops one unit while B rises one unit, and the reverse
        let t1 = structured_t1(&ScenarioTSpec {
            d_a: 3,
            d_b: 2,
            elements: vec![el(1, 0, 0, 1, real(0.6)), el(2, 0, 1, 1, real(0.9))],
        })
        .unwrap();
        let z: f64 = ea.iter().map(|e: &f64| (-beta * e).exp()).sum();
        let pa: Vec<f64> = ea.iter().map(|e| (-beta * e).exp() / z).collect();
        let mut pb = vec![0.0; 2];
        pb[b_index] = 1.0;
        let st = BipartiteState::product(&DensityMatrix::diagonal(&pa).unwrap(), &DensityMatrix::diagonal(&pb).unwrap()).unwrap();
        (ea, eb, beta, t1, st)
    }

    #[test]
    fn thermal_signs_and_agreement() {
        let (ea, eb, beta, t1, st) = thermal_setup(0);
        let cold = thermal_delta_s(&ea, beta, 0, &eb, &t1).unwrap();
        assert!(cold < 0.0);
        let fr = full_rank_second_order(&st, &t1, &ad(&st)).unwrap().value;
        assert!((cold - fr).abs() < 1e-10, "{cold} vs {fr}");

        let (ea, eb, beta, t1, st) = thermal_setup(1);
        let hot = thermal_delta_s(&ea, beta, 1, &eb, &t1).unwrap();
        assert!(hot > 0.0);
        let fr = full_rank_second_order(&st, &t1, &ad(&st)).unwrap().value;
        assert!((hot - fr).abs() < 1e-10);

        assert_eq!(thermal_delta_s(&ea, 0.0, 0, &eb, &t1).unwrap(), 0.0);
    }

    #[test]
    fn thermal_rejects_non_conserving_t() {
        let t1 = structured_t1(&ScenarioTSpec { d_a: 3, d_b: 2, elements: vec![el(2, 0, 0, 1, real(0.5))] }).unwrap();
        assert!(matches!(
            thermal_delta_s(&[0.0, 1.0, 2.0], 1.0, 0, &[0.0, 1.0], &t1),
            Err(PerturbError::EnergyViolation { .. })
        ));
    }

    #[test]
    fn predict_reports_branches() {
        let z = ComplexMatrix::zeros(4);
        let pure = BipartiteState::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let t1 = random_hermitian(4, 9);
        let pair = complete_second_order(&t1, &z, 2, 2).unwrap();
        let p = predict(&pure, &pair, &Tolerances::default()).unwrap();
        assert_eq!(p.branch, Branch::KernelBranch);
        assert!(p.log_coeff.unwrap() > 0.0 && p.order2_coeff.is_none());
        assert!(p.order1_coeff.unwrap().abs() < 1e-12);

        let full = two_level_product(0.75, 0.0);
        let p = predict(&full, &pair, &Tolerances::default()).unwrap();
        assert_eq!(p.branch, Branch::FullRankBranch);
        assert_eq!(p.log_coeff, Some(0.0));
        assert!(p.order2_coeff.is_some());

        let mixed = BipartiteState::diagonal(&[vec![0.6, 0.0], vec![0.4, 0.0], vec![0.0, 0.0]]).unwrap();
        let t6 = random_hermitian(6, 2);
        let pair6 = complete_second_order(&t6, &ComplexMatrix::zeros(6), 3, 2).unwrap();
        let p = predict(&mixed, &pair6, &Tolerances::default()).unwrap();
        assert_eq!(p.branch, Branch::Mixed);
        assert!(p.nonkernel_pair_coeff.is_some() && p.log_coeff.unwrap() > 0.0);

        let b = bell_type(0.8);
        let p = predict(&b, &pair, &Tolerances::default()).unwrap();
        assert!(!p.commutation_ok && p.log_coeff.is_none());

        let near = BipartiteState::diagonal(&[vec![1.0 - 1e-8, 0.0], vec![1e-8, 0.0]]).unwrap();
        let p = predict(&near, &pair, &Tolerances::default()).unwrap();
        assert!(p.order1_coeff.is_none());
        assert_eq!(p.alternative.as_ref().unwrap().branch, Branch::KernelBranch);
    }
}
