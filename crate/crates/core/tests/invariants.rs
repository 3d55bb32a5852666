//! Randomized invariants over states, scattering matrices and the fit.

use proptest::prelude::*;
use scatter_entropy::harness::{library, search, ProbeFamily, ScenarioConfig};
use scatter_entropy::linalg::{kron, ComplexMatrix};
use scatter_entropy::oracle::{self, DEFAULT_GRID};
use scatter_entropy::perturb;
use scatter_entropy::qstate::{self, a_spectral_data, BipartiteState, DensityMatrix};
use scatter_entropy::smatrix::{complete_second_order, exact_s, random_hermitian};
use scatter_entropy::Tolerances;

fn normalized(w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Generic full-rank state `H^2 / tr H^2` from a random Hermitian `H`.
fn generic_state(d_a: usize, d_b: usize, seed: u64) -> BipartiteState {
    let h = random_hermitian(d_a * d_b, seed);
    let sq = &h * &h;
    let tr = sq.trace().re;
    BipartiteState::from_matrix(sq.scale_real(1.0 / tr), d_a, d_b).unwrap()
}

fn table(d_a: usize, d_b: usize, w: &[f64]) -> Vec<Vec<f64>> {
    let w = normalized(&w[..d_a * d_b]);
    w.chunks(d_b).map(<[f64]>::to_vec).collect()
}

fn cfg() -> ProptestConfig {
    ProptestConfig::with_cases(32)
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn entropy_within_bounds(w in prop::collection::vec(0.0f64..1.0, 1..10)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let rho = DensityMatrix::diagonal(&normalized(&w)).unwrap();
        let s = qstate::von_neumann_entropy(&rho);
        prop_assert!(s >= -1e-12);
        prop_assert!(s <= (w.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn scattering_matrix_is_unitary(dim in 2usize..9, seed in any::<u64>(), lambda in 1e-6f64..0.5) {
        let s = exact_s(&random_hermitian(dim, seed), lambda).unwrap();
        prop_assert!(s.unitarity_defect() < 1e-10, "defect {}", s.unitarity_defect());
    }

    #[test]
    fn reduced_state_is_a_density_matrix(d_a in 1usize..4, d_b in 1usize..4, seed in any::<u64>()) {
        let st = generic_state(d_a, d_b, seed);
        let ra = qstate::reduced_a(&st).unwrap();
        prop_assert_eq!(ra.dim(), d_a);
        prop_assert!((ra.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(ra.matrix().hermitian_defect() < 1e-12);
        prop_assert!(ra.eigenvalues().iter().all(|&p| p > -1e-12));
    }

    #[test]
    fn local_couplings_leave_entropy_unchanged(
        d_a in 2usize..4,
        d_b in 2usize..4,
        seed in any::<u64>(),
        lambda in 1e-4f64..0.5,
    ) {
        let st = generic_state(d_a, d_b, seed);
        let on_a = kron(&random_hermitian(d_a, seed ^ 1), &ComplexMatrix::identity(d_b)).unwrap();
        let on_b = kron(&ComplexMatrix::identity(d_a), &random_hermitian(d_b, seed ^ 2)).unwrap();
        for t1 in [on_a, on_b] {
            let ds = oracle::exact_delta_entropy(&st, &t1, lambda).unwrap();
            prop_assert!(ds.abs() < 1e-10, "dS = {ds}");
        }
    }

    #[test]
    fn first_order_term_is_odd_and_vanishes_for_diagonal_states(
        d_a in 2usize..4,
        d_b in 1usize..4,
        w in prop::collection::vec(0.05f64..1.0, 9),
        seed in any::<u64>(),
    ) {
        let t1 = random_hermitian(d_a * d_b, seed);
        let generic = generic_state(d_a, d_b, seed ^ 7);
        if let Ok(a) = perturb::first_order_entropy(&generic, &t1) {
            let flipped = perturb::first_order_entropy(&generic, &t1.scale_real(-1.0)).unwrap();
            prop_assert!((a + flipped).abs() <= 1e-10 * (1.0 + a.abs()));
        }
        let diag = BipartiteState::diagonal(&table(d_a, d_b, &w)).unwrap();
        let a = perturb::first_order_entropy(&diag, &t1).unwrap();
        prop_assert!(a.abs() < 1e-12, "a = {a}");
    }

    #[test]
    fn log_coefficient_forms_agree(
        d_a in 2usize..5,
        d_b in 1usize..4,
        w in prop::collection::vec(0.05f64..1.0, 16),
        zero_row in 0usize..4,
        seed in any::<u64>(),
    ) {
        let mut t = table(d_a, d_b, &w);
        t[zero_row % d_a].iter_mut().for_each(|p| *p = 0.0);
        let t = table(d_a, d_b, &t.concat());
        let st = BipartiteState::diagonal(&t).unwrap();
        let tols = Tolerances::default();
        let adata = a_spectral_data(&st, tols.kernel_tol, tols.degen_tol).unwrap();
        let t1 = random_hermitian(d_a * d_b, seed);
        let forms = perturb::log_coefficient_forms(&st, &t1, &adata, &tols).unwrap();
        prop_assert!(forms.summed_squares >= 0.0);
        prop_assert!((forms.summed_squares - forms.expanded).abs() < 1e-10);
    }

    #[test]
    fn fit_recovers_synthetic_coefficients(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0) {
        let values: Vec<f64> = DEFAULT_GRID
            .iter()
            .map(|&l| a * l + b * l * l * (1.0 / (l * l)).ln() + c * l * l)
            .collect();
        let (fa, fb, fc, cond) = oracle::fit_coefficients(&DEFAULT_GRID, &values).unwrap();
        prop_assert!(cond < oracle::FIT_CONDITION_LIMIT);
        for (want, got) in [(a, fa), (b, fb), (c, fc)] {
            prop_assert!((want - got).abs() < 1e-8, "{want} vs {got}");
        }
    }

    #[test]
    fn two_level_prediction_matches_closed_form(x in 0.55f64..0.95, y in 0.0f64..1.0, t in 0.2f64..1.5) {
        let cfg = library::two_level(x, y, t);
        let st = cfg.build_state().unwrap();
        let t1 = cfg.build_t1().unwrap();
        let pair = complete_second_order(&t1, &ComplexMatrix::zeros(4), 2, 2).unwrap();
        let p = perturb::predict(&st, &pair, &Tolerances::default()).unwrap();
        let want = library::two_level_closed_form(x, y, t);
        let got = p.order2_coeff.unwrap();
        prop_assert!((want - got).abs() <= 1e-10 * (1.0 + want.abs()), "{want} vs {got}");
    }

    #[test]
    fn scenario_config_round_trips(x in 0.01f64..0.99, y in 0.0f64..1.0, t in -2.0f64..2.0, seed in any::<u64>()) {
        let mut cfg = library::two_level(x, y, t);
        cfg.seed = seed;
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(again, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn searches_are_deterministic(seed in any::<u64>()) {
        let st = BipartiteState::diagonal(&[vec![0.6, 0.4], vec![0.0, 0.0]]).unwrap();
        let d1 = search::demon_search(&st, 1e-3, 40, seed).unwrap();
        let d2 = search::demon_search(&st, 1e-3, 40, seed).unwrap();
        prop_assert_eq!(d1.best_delta_s.to_bits(), d2.best_delta_s.to_bits());
        prop_assert_eq!(d1.evaluations, 40);
        let p1 = search::guarantee_probe(&st, ProbeFamily::Gaussian, 1e-3, 30, seed, 1e-12).unwrap();
        let p2 = search::guarantee_probe(&st, ProbeFamily::Gaussian, 1e-3, 30, seed, 1e-12).unwrap();
        prop_assert_eq!(p1.min_delta_s.to_bits(), p2.min_delta_s.to_bits());
        prop_assert_eq!(p1.argmin_index, p2.argmin_index);
        let t1 = search::probe_t1(ProbeFamily::Gaussian, 4, p1.argmin_seed, None);
        let replay = oracle::exact_delta_entropy(&st, &t1, 1e-3).unwrap();
        prop_assert!((replay - p1.min_delta_s).abs() < 1e-15);
    }
}
