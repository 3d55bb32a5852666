//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "pure-product-2x2"
//! mode = "sweep"                 # check | predict | sweep | demon | probe
//! d_a = 2
//! d_b = 2
//! lambda_grid = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5]   # optional
//! search_lambda = 1e-3           # optional, coupling for demon and probe
//! seed = 7                       # optional, demon and probe seed
//! budget = 500                   # optional, demon evaluations
//! samples = 1000                 # optional, probe samples
//! probe_family = "gaussian"      # optional: gaussian | protected
//!
//! [tolerances]                   # optional, each key optional
//! kernel_tol = 1e-12
//! degen_tol = 1e-9
//! commutator_tol = 1e-10
//!
//! [state]
//! kind = "product"               # product | diagonal | pure | thermal | explicit
//! a_weights = [1.0, 0.0]
//! b_weights = [1.0, 0.0]
//!
//! [t]
//! kind = "structured"            # structured | random | kron_a
//! elements = [[0, 0, 1, 1, 0.8, 0.0]]
//! ```
//!
//! State variants:
//!
//! - `product`: `a_weights`, `b_weights`, each summing to 1.
//! - `diagonal`: `table`, a `d_a` by `d_b` array of joint probabilities.
//! - `pure`: `amplitudes`, `[re, im]` pairs in A-major order.
//! - `thermal`: `a_energies`, `beta`, `b_index`, optional `b_energies`;
//!   A is thermal and B sits in basis state `b_index`.
//! - `explicit`: `entries`, `[row, col, re, im]` tuples of the full density
//!   matrix; the conjugate of each off-diagonal entry is filled in.
//!
//! T1 variants:
//!
//! - `structured`: `elements`, `[m, mt, mp, mtp, re, im]` tuples of
//!   `<m, mt|T1|mp, mtp>`; conjugates are filled in.
//! - `random`: `seed`, optional `scale`; a seeded Gaussian Hermitian matrix.
//! - `kron_a`: `entries`, `[row, col, re, im]` tuples of a Hermitian `H_A`;
//!   T1 is `H_A (x) 1_B`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, C64};
use crate::oracle::DEFAULT_GRID;
use crate::qstate::{BipartiteState, DensityMatrix};
use crate::smatrix::{self, ScenarioTSpec, TElement};
use crate::Tolerances;

/// Allowed deviation of probabilities from unit sum.
pub const PROBABILITY_TOL: f64 = 1e-12;
pub const DEFAULT_SEARCH_LAMBDA: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_BUDGET: usize = 500;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}field `{field}`: {message}", line.map(|l| format!("line {l}, ")).unwrap_or_default())]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
    #[error("unknown built-in scenario `{0}`")]
    UnknownBuiltin(String),
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            line: None,
            message: message.into(),
        }
    }

    /// Field name for `Invalid`, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Check,
    Predict,
    Sweep,
    Demon,
    Probe,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Check => "check",
            Mode::Predict => "predict",
            Mode::Sweep => "sweep",
            Mode::Demon => "demon",
            Mode::Probe => "probe",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    /// Gaussian Hermitian T1 of unit Frobenius norm.
    #[default]
    Gaussian,
    /// Gaussian T1 projected to be block diagonal between the support and
    /// the kernel of the reduced state.
    Protected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Product {
        a_weights: Vec<f64>,
        b_weights: Vec<f64>,
    },
    Diagonal {
        table: Vec<Vec<f64>>,
    },
    Pure {
        amplitudes: Vec<[f64; 2]>,
    },
    Thermal {
        a_energies: Vec<f64>,
        beta: f64,
        b_index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_energies: Option<Vec<f64>>,
    },
    Explicit {
        entries: Vec<[f64; 4]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TSpec {
    Structured {
        elements: Vec<[f64; 6]>,
    },
    Random {
        seed: u64,
        #[serde(default = "unit")]
        scale: f64,
    },
    KronA {
        entries: Vec<[f64; 4]>,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub d_a: usize,
    pub d_b: usize,
    #[serde(default = "default_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_search_lambda")]
    pub search_lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub probe_family: ProbeFamily,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub state: StateSpec,
    pub t: TSpec,
}

fn default_grid() -> Vec<f64> {
    DEFAULT_GRID.to_vec()
}

fn default_search_lambda() -> f64 {
    DEFAULT_SEARCH_LAMBDA
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn line_of_offset(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Line of `key = ...` inside `[section]` (or the top level when `section`
/// is empty).
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ScenarioConfig {
    pub fn from_toml_str(source: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(source).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_of_offset(source, s.start));
            ConfigError::Syntax {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|e| match e {
            ConfigError::Invalid { field, message, .. } => {
                let (section, key) = field.rsplit_once('.').unwrap_or(("", field.as_str()));
                ConfigError::Invalid {
                    line: locate(source, section, key),
                    field,
                    message,
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// Structural checks that do not need any linear algebra.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::invalid("name", "must not be empty"));
        }
        if self.d_a == 0 {
            return Err(ConfigError::invalid("d_a", "must be positive"));
        }
        if self.d_b == 0 {
            return Err(ConfigError::invalid("d_b", "must be positive"));
        }
        if !(self.search_lambda > 0.0 && self.search_lambda <= crate::oracle::MAX_LAMBDA) {
            return Err(ConfigError::invalid(
                "search_lambda",
                format!("{} is outside (0, {}]", self.search_lambda, crate::oracle::MAX_LAMBDA),
            ));
        }
        if self.mode == Mode::Sweep {
            crate::oracle::validate_grid(&self.lambda_grid)
                .map_err(|e| ConfigError::invalid("lambda_grid", e.to_string()))?;
        }
        if self.budget == 0 {
            return Err(ConfigError::invalid("budget", "must be at least 1"));
        }
        if self.samples == 0 {
            return Err(ConfigError::invalid("samples", "must be at least 1"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("kernel_tol", t.kernel_tol),
            ("degen_tol", t.degen_tol),
            ("commutator_tol", t.commutator_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        self.validate_state()?;
        self.validate_t()
    }

    fn validate_state(&self) -> Result<(), ConfigError> {
        let (d_a, d_b) = (self.d_a, self.d_b);
        match &self.state {
            StateSpec::Product { a_weights, b_weights } => {
                check_distribution("state.a_weights", a_weights, d_a)?;
                check_distribution("state.b_weights", b_weights, d_b)
            }
            StateSpec::Diagonal { table } => {
                if table.len() != d_a || table.iter().any(|r| r.len() != d_b) {
                    return Err(ConfigError::invalid("state.table", format!("must be {d_a} rows of {d_b}")));
                }
                let flat: Vec<f64> = table.iter().flatten().copied().collect();
                check_distribution("state.table", &flat, d_a * d_b)
            }
            StateSpec::Pure { amplitudes } => {
                if amplitudes.len() != d_a * d_b {
                    return Err(ConfigError::invalid(
                        "state.amplitudes",
                        format!("expected {} amplitudes, found {}", d_a * d_b, amplitudes.len()),
                    ));
                }
                let norm: f64 = amplitudes.iter().map(|[re, im]| re * re + im * im).sum();
                if (norm - 1.0).abs() > PROBABILITY_TOL {
                    return Err(ConfigError::invalid(
                        "state.amplitudes",
                        format!("probabilities sum to {norm}, not 1"),
                    ));
                }
                Ok(())
            }
            StateSpec::Thermal {
                a_energies,
                beta,
                b_index,
                b_energies,
            } => {
                if a_energies.len() != d_a {
                    return Err(ConfigError::invalid("state.a_energies", format!("expected {d_a} energies")));
                }
                if !beta.is_finite() || *beta < 0.0 {
                    return Err(ConfigError::invalid("state.beta", "must be finite and non-negative"));
                }
                if *b_index >= d_b {
                    return Err(ConfigError::invalid("state.b_index", format!("must be below {d_b}")));
                }
                if let Some(e) = b_energies {
                    if e.len() != d_b {
                        return Err(ConfigError::invalid("state.b_energies", format!("expected {d_b} energies")));
                    }
                }
                Ok(())
            }
            StateSpec::Explicit { entries } => check_entries("state.entries", entries, d_a * d_b),
        }
    }

    fn validate_t(&self) -> Result<(), ConfigError> {
        match &self.t {
            TSpec::Structured { elements } => {
                for e in elements {
                    let idx = [e[0], e[1], e[2], e[3]];
                    if idx.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
                        return Err(ConfigError::invalid("t.elements", format!("non-integer index in {e:?}")));
                    }
                }
                Ok(())
            }
            TSpec::Random { scale, .. } => {
                if !scale.is_finite() {
                    return Err(ConfigError::invalid("t.scale", "must be finite"));
                }
                Ok(())
            }
            TSpec::KronA { entries } => check_entries("t.entries", entries, self.d_a),
        }
    }

    pub fn build_state(&self) -> Result<BipartiteState, ConfigError> {
        let (d_a, d_b) = (self.d_a, self.d_b);
        let field = state_field(&self.state);
        let wrap = |e: crate::qstate::QStateError| ConfigError::invalid(field, e.to_string());
        match &self.state {
            StateSpec::Product { a_weights, b_weights } => BipartiteState::product(
                &DensityMatrix::diagonal(a_weights).map_err(wrap)?,
                &DensityMatrix::diagonal(b_weights).map_err(wrap)?,
            )
            .map_err(wrap),
            StateSpec::Diagonal { table } => BipartiteState::diagonal(table).map_err(wrap),
            StateSpec::Pure { amplitudes } => {
                let amps: Vec<C64> = amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                BipartiteState::pure(&amps, d_a, d_b).map_err(wrap)
            }
            StateSpec::Thermal {
                a_energies,
                beta,
                b_index,
                ..
            } => {
                let mut pb = vec![0.0; d_b];
                pb[*b_index] = 1.0;
                BipartiteState::product(
                    &DensityMatrix::diagonal(&thermal_weights(a_energies, *beta)).map_err(wrap)?,
                    &DensityMatrix::diagonal(&pb).map_err(wrap)?,
                )
                .map_err(wrap)
            }
            StateSpec::Explicit { entries } => {
                let m = hermitian_from_entries(entries, d_a * d_b).map_err(|msg| ConfigError::invalid(field, msg))?;
                BipartiteState::from_matrix(m, d_a, d_b).map_err(wrap)
            }
        }
    }

    pub fn build_t1(&self) -> Result<ComplexMatrix, ConfigError> {
        let (d_a, d_b) = (self.d_a, self.d_b);
        match &self.t {
            TSpec::Structured { elements } => {
                let spec = ScenarioTSpec {
                    d_a,
                    d_b,
                    elements: elements
                        .iter()
                        .map(|e| TElement {
                            m: e[0] as usize,
                            mt: e[1] as usize,
                            mp: e[2] as usize,
                            mtp: e[3] as usize,
                            value: C64::new(e[4], e[5]),
                        })
                        .collect(),
                };
                smatrix::structured_t1(&spec).map_err(|e| ConfigError::invalid("t.elements", e.to_string()))
            }
            TSpec::Random { seed, scale } => Ok(smatrix::random_hermitian(d_a * d_b, *seed).scale_real(*scale)),
            TSpec::KronA { entries } => {
                let h = hermitian_from_entries(entries, d_a).map_err(|msg| ConfigError::invalid("t.entries", msg))?;
                linalg::kron(&h, &ComplexMatrix::identity(d_b)).map_err(|e| ConfigError::invalid("t.entries", e.to_string()))
            }
        }
    }

    /// `(a_energies, beta, b_index, b_energies)` when the state is thermal
    /// with B energies given.
    pub fn thermal_data(&self) -> Option<(&[f64], f64, usize, &[f64])> {
        match &self.state {
            StateSpec::Thermal {
                a_energies,
                beta,
                b_index,
                b_energies: Some(eb),
            } => Some((a_energies, *beta, *b_index, eb)),
            _ => None,
        }
    }

    /// The seed of a random T1, if any.
    pub fn t_seed(&self) -> Option<u64> {
        match self.t {
            TSpec::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

fn state_field(s: &StateSpec) -> &'static str {
    match s {
        StateSpec::Product { .. } => "state.a_weights",
        StateSpec::Diagonal { .. } => "state.table",
        StateSpec::Pure { .. } => "state.amplitudes",
        StateSpec::Thermal { .. } => "state.a_energies",
        StateSpec::Explicit { .. } => "state.entries",
    }
}

pub fn thermal_weights(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn check_distribution(field: &str, w: &[f64], expected_len: usize) -> Result<(), ConfigError> {
    if w.len() != expected_len {
        return Err(ConfigError::invalid(
            field,
            format!("expected {expected_len} entries, found {}", w.len()),
        ));
    }
    if let Some(bad) = w.iter().find(|&&p| !p.is_finite() || p < 0.0) {
        return Err(ConfigError::invalid(field, format!("invalid probability {bad}")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(ConfigError::invalid(field, format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_entries(field: &str, entries: &[[f64; 4]], dim: usize) -> Result<(), ConfigError> {
    for e in entries {
        let (r, c) = (e[0], e[1]);
        if r < 0.0 || c < 0.0 || r.fract() != 0.0 || c.fract() != 0.0 || r as usize >= dim || c as usize >= dim {
            return Err(ConfigError::invalid(
                field,
                format!("index ({r}, {c}) is not an integer below {dim}"),
            ));
        }
    }
    Ok(())
}

/// Hermitian matrix from `[row, col, re, im]` tuples, filling conjugates.
fn hermitian_from_entries(entries: &[[f64; 4]], dim: usize) -> Result<ComplexMatrix, String> {
    let mut m = ComplexMatrix::zeros(dim);
    let mut set = vec![false; dim * dim];
    let mut put = |r: usize, c: usize, v: C64, m: &mut ComplexMatrix| -> Result<(), String> {
        if set[r * dim + c] && m[(r, c)] != v {
            return Err(format!("conflicting values for ({r}, {c}): {} and {v}", m[(r, c)]));
        }
        set[r * dim + c] = true;
        m[(r, c)] = v;
        Ok(())
    };
    for e in entries {
        let (r, c) = (e[0] as usize, e[1] as usize);
        let v = C64::new(e[2], e[3]);
        if r == c && v.im != 0.0 {
            return Err(format!("diagonal entry ({r}, {r}) must be real"));
        }
        put(r, c, v, &mut m)?;
        put(c, r, v.conj(), &mut m)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PURE: &str = r#"
name = "pure"
mode = "sweep"
d_a = 2
d_b = 2

[state]
kind = "product"
a_weights = [1.0, 0.0]
b_weights = [1.0, 0.0]

[t]
kind = "structured"
elements = [[0, 0, 1, 1, 0.8, 0.0]]
"#;

    #[test]
    fn parses_minimal_file_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str(PURE).unwrap();
        assert_eq!(cfg.mode, Mode::Sweep);
        assert_eq!(cfg.lambda_grid, DEFAULT_GRID.to_vec());
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.search_lambda, DEFAULT_SEARCH_LAMBDA);
        let t1 = cfg.build_t1().unwrap();
        assert_eq!(t1[(0, 3)], C64::new(0.8, 0.0));
        assert_eq!(t1[(3, 0)], C64::new(0.8, 0.0));
        assert_eq!(cfg.build_state().unwrap().matrix()[(0, 0)].re, 1.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ScenarioConfig::from_toml_str(PURE).unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn bad_probabilities_name_the_field_and_line() {
        let src = PURE.replace("a_weights = [1.0, 0.0]", "a_weights = [0.5, 0.4]");
        let err = ScenarioConfig::from_toml_str(&src).unwrap_err();
        assert_eq!(err.field(), Some("state.a_weights"));
        match err {
            ConfigError::Invalid { line, message, .. } => {
                assert_eq!(line, Some(9));
                assert!(message.contains("0.9"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagonal_table_must_sum_to_one() {
        let src = PURE.replace(
            "kind = \"product\"\na_weights = [1.0, 0.0]\nb_weights = [1.0, 0.0]",
            "kind = \"diagonal\"\ntable = [[0.5, 0.2], [0.1, 0.1]]",
        );
        let err = ScenarioConfig::from_toml_str(&src).unwrap_err();
        assert_eq!(err.field(), Some("state.table"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let src = PURE.replace("d_b = 2", "d_b = ");
        match ScenarioConfig::from_toml_str(&src).unwrap_err() {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let src = PURE.replace("kind = \"structured\"", "kind = \"structured\"\nbogus = 1");
        assert!(matches!(
            ScenarioConfig::from_toml_str(&src),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn sweep_grid_is_validated() {
        let src = PURE.replace("d_b = 2", "d_b = 2\nlambda_grid = [1e-2, 1e-3]");
        let err = ScenarioConfig::from_toml_str(&src).unwrap_err();
        assert_eq!(err.field(), Some("lambda_grid"));
    }

    #[test]
    fn thermal_and_explicit_states() {
        let src = PURE.replace(
            "kind = \"product\"\na_weights = [1.0, 0.0]\nb_weights = [1.0, 0.0]",
            "kind = \"thermal\"\na_energies = [0.0, 1.0]\nbeta = 1.0\nb_index = 0\nb_energies = [0.0, 1.0]",
        );
        let cfg = ScenarioConfig::from_toml_str(&src).unwrap();
        let st = cfg.build_state().unwrap();
        let p0 = 1.0 / (1.0 + (-1f64).exp());
        assert!((st.matrix()[(0, 0)].re - p0).abs() < 1e-15);
        assert!(cfg.thermal_data().is_some());

        let src = PURE.replace(
            "kind = \"product\"\na_weights = [1.0, 0.0]\nb_weights = [1.0, 0.0]",
            "kind = \"explicit\"\nentries = [[0, 0, 0.5, 0.0], [3, 3, 0.5, 0.0], [0, 3, 0.5, 0.0]]",
        );
        let st = ScenarioConfig::from_toml_str(&src).unwrap().build_state().unwrap();
        assert_eq!(st.matrix()[(3, 0)], C64::new(0.5, 0.0));
    }

    #[test]
    fn kron_a_t_is_local() {
        let src = PURE.replace(
            "kind = \"structured\"\nelements = [[0, 0, 1, 1, 0.8, 0.0]]",
            "kind = \"kron_a\"\nentries = [[0, 1, 0.3, 0.2], [0, 0, 1.0, 0.0]]",
        );
        let t1 = ScenarioConfig::from_toml_str(&src).unwrap().build_t1().unwrap();
        assert_eq!(t1[(0, 2)], C64::new(0.3, 0.2));
        assert_eq!(t1[(3, 1)], C64::new(0.3, -0.2));
        assert_eq!(t1[(1, 1)], C64::new(1.0, 0.0));
        assert_eq!(t1[(0, 1)], C64::new(0.0, 0.0));
    }
}
