//! Built-in scenarios.

use crate::oracle::DEFAULT_GRID;
use crate::Tolerances;

use super::config::{ConfigError, Mode, ProbeFamily, ScenarioConfig, StateSpec, TSpec, DEFAULT_BUDGET, DEFAULT_SAMPLES, DEFAULT_SEARCH_LAMBDA};

/// Coupling amplitude of the pure-product scenario.
pub const PURE_PRODUCT_T: f64 = 0.8;
/// Coupling amplitude of the two-two-level scenarios.
pub const TWO_LEVEL_T: f64 = 1.0;
/// `(x, y)` grid of the two-two-level full-rank scenarios.
pub const TWO_LEVEL_GRID: [(f64, f64); 6] = [(0.75, 0.0), (0.75, 0.5), (0.75, 1.0), (0.6, 0.0), (0.6, 0.5), (0.6, 1.0)];
pub const THERMAL_A_ENERGIES: [f64; 3] = [0.0, 1.0, 2.0];
pub const THERMAL_B_ENERGIES: [f64; 2] = [0.0, 1.0];
pub const THERMAL_BETA: f64 = 0.8;
pub const BELL_WEIGHT: f64 = 0.8;

fn base(name: &str, mode: Mode, d_a: usize, d_b: usize, state: StateSpec, t: TSpec) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        mode,
        d_a,
        d_b,
        lambda_grid: DEFAULT_GRID.to_vec(),
        search_lambda: DEFAULT_SEARCH_LAMBDA,
        seed: 0,
        budget: DEFAULT_BUDGET,
        samples: DEFAULT_SAMPLES,
        probe_family: ProbeFamily::Gaussian,
        tolerances: Tolerances::default(),
        state,
        t,
    }
}

fn two_level_name(x: f64, y: f64) -> String {
    format!("fullrank-x{}-y{:02}", x.to_string().replace('.', ""), (y * 10.0).round() as u32)
}

/// Two-two-level product state `[x, 1-x] (x) [y, 1-y]` with the single
/// exchange `(0, 1) <-> (1, 0)` of amplitude `t`.
pub fn two_level(x: f64, y: f64, t: f64) -> ScenarioConfig {
    base(
        &two_level_name(x, y),
        Mode::Sweep,
        2,
        2,
        StateSpec::Product {
            a_weights: vec![x, 1.0 - x],
            b_weights: vec![y, 1.0 - y],
        },
        TSpec::Structured {
            elements: vec![[0.0, 1.0, 1.0, 0.0, t, 0.0]],
        },
    )
}

/// Closed form of the lambda^2 coefficient for [`two_level`].
pub fn two_level_closed_form(x: f64, y: f64, t: f64) -> f64 {
    t * t * (x / (1.0 - x)).ln() * (x * (1.0 - y) - (1.0 - x) * y)
}

/// Two-two-level product state with both `(0, 0) <-> (1, 1)` and
/// `(0, 1) <-> (1, 0)` of amplitude `t`; the lambda^2 coefficient is
/// `t^2 ln(x/(1-x)) (2x - 1)`, independent of `y`.
pub fn two_level_listed(x: f64, y: f64, t: f64) -> ScenarioConfig {
    let mut cfg = two_level(x, y, t);
    cfg.name = format!("{}-listed", cfg.name);
    cfg.t = TSpec::Structured {
        elements: vec![[0.0, 0.0, 1.0, 1.0, t, 0.0], [0.0, 1.0, 1.0, 0.0, t, 0.0]],
    };
    cfg
}

pub fn pure_product() -> ScenarioConfig {
    base(
        "pure-product-2x2",
        Mode::Sweep,
        2,
        2,
        StateSpec::Product {
            a_weights: vec![1.0, 0.0],
            b_weights: vec![1.0, 0.0],
        },
        TSpec::Structured {
            elements: vec![[0.0, 0.0, 1.0, 1.0, PURE_PRODUCT_T, 0.0]],
        },
    )
}

/// Thermal A with levels 0, 1, 2 and B in level `b_index` of {0, 1}; T1
/// lowers A by one unit while raising B by one unit, and the reverse.
pub fn thermal(b_index: usize) -> ScenarioConfig {
    let name = if b_index == 0 { "thermal-ground" } else { "thermal-inverted" };
    base(
        name,
        Mode::Sweep,
        3,
        2,
        StateSpec::Thermal {
            a_energies: THERMAL_A_ENERGIES.to_vec(),
            beta: THERMAL_BETA,
            b_index,
            b_energies: Some(THERMAL_B_ENERGIES.to_vec()),
        },
        TSpec::Structured {
            elements: vec![[1.0, 0.0, 0.0, 1.0, 0.6, 0.0], [2.0, 0.0, 1.0, 1.0, 0.9, 0.0]],
        },
    )
}

/// `sqrt(p)|00> + sqrt(1-p)|11>` with an imaginary `(0,0) <-> (1,1)` element;
/// the linear term is present.
pub fn bell_counterexample() -> ScenarioConfig {
    let (s, c) = (BELL_WEIGHT.sqrt(), (1.0 - BELL_WEIGHT).sqrt());
    base(
        "bell-counterexample",
        Mode::Sweep,
        2,
        2,
        StateSpec::Pure {
            amplitudes: vec![[s, 0.0], [0.0, 0.0], [0.0, 0.0], [c, 0.0]],
        },
        TSpec::Structured {
            elements: vec![[0.0, 0.0, 1.0, 1.0, 0.0, 0.5]],
        },
    )
}

/// Maximally entangled pair, searched adversarially.
pub fn bell_maximal() -> ScenarioConfig {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    base(
        "bell-maximal",
        Mode::Demon,
        2,
        2,
        StateSpec::Pure {
            amplitudes: vec![[h, 0.0], [0.0, 0.0], [0.0, 0.0], [h, 0.0]],
        },
        TSpec::Random { seed: 1, scale: 1.0 },
    )
}

/// T1 acting on A alone cannot change the spectrum of rho_A.
pub fn kron_a_null() -> ScenarioConfig {
    base(
        "kron-a-null",
        Mode::Predict,
        2,
        2,
        StateSpec::Diagonal {
            table: vec![vec![0.1, 0.3], vec![0.4, 0.2]],
        },
        TSpec::KronA {
            entries: vec![[0.0, 0.0, 0.7, 0.0], [1.0, 1.0, -0.2, 0.0], [0.0, 1.0, 0.4, -0.3]],
        },
    )
}

/// `|0><0| (x) diag(0.7, 0.3)` with T1 block diagonal between the support
/// and the kernel of rho_A.
pub fn superselection_protected() -> ScenarioConfig {
    let mut cfg = base(
        "superselection-protected",
        Mode::Probe,
        2,
        2,
        StateSpec::Diagonal {
            table: vec![vec![0.7, 0.3], vec![0.0, 0.0]],
        },
        TSpec::Structured {
            elements: vec![[0.0, 0.0, 0.0, 1.0, 0.6, 0.0], [1.0, 0.0, 1.0, 1.0, 0.4, 0.0]],
        },
    );
    cfg.probe_family = ProbeFamily::Protected;
    cfg
}

/// Separable state with a kernel and a generic T1.
pub fn separable_kernel() -> ScenarioConfig {
    base(
        "separable-kernel",
        Mode::Probe,
        2,
        2,
        StateSpec::Diagonal {
            table: vec![vec![0.6, 0.4], vec![0.0, 0.0]],
        },
        TSpec::Random { seed: 11, scale: 1.0 },
    )
}

/// Full-rank two-two-level state searched adversarially.
pub fn fullrank_demon() -> ScenarioConfig {
    let mut cfg = two_level(0.75, 0.0, TWO_LEVEL_T);
    cfg.name = "fullrank-demon".into();
    cfg.mode = Mode::Demon;
    cfg
}

pub fn builtins() -> Vec<ScenarioConfig> {
    let mut out = vec![pure_product()];
    out.extend(TWO_LEVEL_GRID.iter().map(|&(x, y)| two_level(x, y, TWO_LEVEL_T)));
    out.push(two_level_listed(0.75, 0.0, TWO_LEVEL_T));
    out.push(thermal(0));
    out.push(thermal(1));
    out.push(bell_counterexample());
    out.push(bell_maximal());
    out.push(kron_a_null());
    out.push(superselection_protected());
    out.push(separable_kernel());
    out.push(fullrank_demon());
    out
}

pub fn builtin(name: &str) -> Result<ScenarioConfig, ConfigError> {
    builtins()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| ConfigError::UnknownBuiltin(name.to_string()))
}
