//! Adversarial search over T1 and randomized certification of the
//! monotonicity guarantee.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{self, ComplexMatrix, C64};
use crate::oracle::{self, OracleError};
use crate::qstate::{self, BipartiteState, QStateError};

use super::config::ProbeFamily;

/// Consecutive non-improving moves before a restart.
pub const STAGNATION_LIMIT: usize = 20;
/// Non-improving moves between step halvings.
pub const HALVING_PERIOD: usize = 5;
pub const INITIAL_STEP: f64 = 0.5;

/// Hermitian matrix from `dim^2` real coordinates: the diagonal, then the
/// real and imaginary parts of the strict upper triangle, row by row.
pub fn hermitian_from_params(params: &[f64], dim: usize) -> ComplexMatrix {
    assert_eq!(params.len(), dim * dim, "parameter count");
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(params[i], 0.0);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in i + 1..dim {
            let v = C64::new(params[k], params[k + 1]);
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
            k += 2;
        }
    }
    m
}

/// Normalizes to unit Frobenius norm of the Hermitian matrix.
fn normalize(params: &mut [f64], dim: usize) {
    let norm = hermitian_from_params(params, dim).frobenius_norm();
    if norm > 0.0 {
        params.iter_mut().for_each(|p| *p /= norm);
    }
}

fn gaussian_params(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut p, dim);
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub evaluation: usize,
    pub restart: usize,
    pub delta_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemonResult {
    /// Most entropy-decreasing T1 found, unit Frobenius norm.
    pub best_t1: ComplexMatrix,
    pub best_delta_s: f64,
    pub lambda: f64,
    pub budget: usize,
    pub seed: u64,
    pub evaluations: usize,
    pub restarts: usize,
    /// Every improvement of the best value, in order.
    pub trace: Vec<TracePoint>,
}

struct Objective<'a> {
    state: &'a BipartiteState,
    dim: usize,
    lambda: f64,
    entropy_in: f64,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, params: &[f64]) -> Result<f64, OracleError> {
        self.evaluations += 1;
        let t1 = hermitian_from_params(params, self.dim);
        let s = linalg::matexp_skew(&t1, self.lambda)?;
        let out = oracle::evolve_exact(self.state, &s)?;
        let after = qstate::entropy_from_eigenvalues(qstate::reduced_a(&out)?.eigenvalues(), 0.0);
        Ok(after - self.entropy_in)
    }
}

/// Gradient-free minimization of the exact entropy change over Hermitian
/// T1 of unit Frobenius norm: Gaussian restarts with a sign flip, then
/// random coordinate moves with step halving until 20 stagnant rounds.
pub fn demon_search(state: &BipartiteState, lambda: f64, budget: usize, seed: u64) -> Result<DemonResult, OracleError> {
    let dim = state.matrix().dim();
    let entropy_in = qstate::entropy_from_eigenvalues(
        qstate::reduced_a(state).map_err(OracleError::from)?.eigenvalues(),
        0.0,
    );
    let mut f = Objective {
        state,
        dim,
        lambda,
        entropy_in,
        evaluations: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::new();
    let mut restarts = 0;

    let mut consider = |p: &[f64], v: f64, evals: usize, restart: usize, best: &mut Option<(Vec<f64>, f64)>| {
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            *best = Some((p.to_vec(), v));
            trace.push(TracePoint {
                evaluation: evals,
                restart,
                delta_s: v,
            });
        }
    };

    while f.evaluations < budget {
        restarts += 1;
        let mut x = gaussian_params(&mut rng, dim);
        let mut fx = f.eval(&x)?;
        consider(&x, fx, f.evaluations, restarts, &mut best);
        if f.evaluations < budget {
            let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
            let ff = f.eval(&flipped)?;
            consider(&flipped, ff, f.evaluations, restarts, &mut best);
            if ff < fx {
                x = flipped;
                fx = ff;
            }
        }
        let mut step = INITIAL_STEP;
        let mut stagnant = 0;
        while f.evaluations < budget && stagnant < STAGNATION_LIMIT {
            let k = rng.random_range(0..x.len());
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let mut cand = x.clone();
            cand[k] += sign * step;
            normalize(&mut cand, dim);
            let fc = f.eval(&cand)?;
            if fc < fx {
                x = cand;
                fx = fc;
                stagnant = 0;
                consider(&x, fx, f.evaluations, restarts, &mut best);
            } else {
                stagnant += 1;
                if stagnant % HALVING_PERIOD == 0 {
                    step *= 0.5;
                }
            }
        }
    }
    let (params, best_delta_s) = best.expect("budget is at least one evaluation");
    Ok(DemonResult {
        best_t1: hermitian_from_params(&params, dim),
        best_delta_s,
        lambda,
        budget,
        seed,
        evaluations: f.evaluations,
        restarts,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub family: ProbeFamily,
    pub samples: usize,
    pub seed: u64,
    pub lambda: f64,
    pub min_delta_s: f64,
    /// Sample index of the minimum and the seed that generated its T1.
    pub argmin_index: usize,
    pub argmin_seed: u64,
}

/// Seed of sample `index`: the `index`-th stream of a ChaCha generator
/// keyed by `seed`.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Projector onto the support of `rho_A`, lifted to `A (x) B`.
fn support_projector(state: &BipartiteState, kernel_tol: f64) -> Result<ComplexMatrix, QStateError> {
    let reduced = qstate::reduced_a(state)?;
    let spec = reduced.spectrum();
    let p_a = spec.apply_fn(|e| if e > kernel_tol { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    Ok(linalg::kron(&p_a, &ComplexMatrix::identity(state.d_b()))?)
}

/// Sampled T1 of the requested family, unit Frobenius norm.
pub fn probe_t1(family: ProbeFamily, dim: usize, sample_seed: u64, support: Option<&ComplexMatrix>) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let h = hermitian_from_params(&gaussian_params(&mut rng, dim), dim);
    let t = match (family, support) {
        (ProbeFamily::Protected, Some(p)) => {
            let q = &ComplexMatrix::identity(dim) - p;
            &(&(p * &h) * p) + &(&(&q * &h) * &q)
        }
        _ => h,
    };
    let n = t.frobenius_norm();
    if n > 0.0 {
        t.scale_real(1.0 / n)
    } else {
        t
    }
}

/// Minimum exact entropy change over `samples` random T1 at `lambda`.
/// Samples run in parallel; the reduction keeps the lowest index on ties.
pub fn guarantee_probe(
    state: &BipartiteState,
    family: ProbeFamily,
    lambda: f64,
    samples: usize,
    seed: u64,
    kernel_tol: f64,
) -> Result<ProbeResult, OracleError> {
    let dim = state.matrix().dim();
    let support = match family {
        ProbeFamily::Protected => Some(support_projector(state, kernel_tol)?),
        ProbeFamily::Gaussian => None,
    };
    let values = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = sample_seed(seed, i);
            let t1 = probe_t1(family, dim, s, support.as_ref());
            oracle::exact_delta_entropy(state, &t1, lambda).map(|v| (i, s, v))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (argmin_index, argmin_seed, min_delta_s) = values
        .into_iter()
        .fold(None, |acc: Option<(usize, u64, f64)>, x| match acc {
            Some(a) if a.2 <= x.2 => Some(a),
            _ => Some(x),
        })
        .expect("at least one sample");
    Ok(ProbeResult {
        family,
        samples,
        seed,
        lambda,
        min_delta_s,
        argmin_index,
        argmin_seed,
    })
}
