//! Scenario pipeline: classify, predict, sweep against the exact oracle,
//! adversarial search and randomized probing, and report emission.

pub mod config;
pub mod library;
pub mod search;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::criteria::{self, CriteriaError, GuaranteeVerdict, Overall};
use crate::linalg::ComplexMatrix;
use crate::oracle::{self, OracleError, SweepFit};
use crate::perturb::{self, PerturbError, PerturbativePrediction};
use crate::qstate::{BipartiteState, QStateError};
use crate::smatrix::{self, SMatrixError};
use crate::Tolerances;

pub use config::{ConfigError, Mode, ProbeFamily, ScenarioConfig, StateSpec, TSpec};
pub use search::{demon_search, guarantee_probe, DemonResult, ProbeResult};

/// A probe or demon value below `-VIOLATION_TOL` under a strict-increase
/// verdict contradicts the guarantee.
pub const VIOLATION_TOL: f64 = 1e-10;
/// Floor of the denominator in relative errors.
pub const RELATIVE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericalError {
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    SMatrix(#[from] SMatrixError),
    #[error(transparent)]
    State(#[from] QStateError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario `{scenario}`: {source}")]
    Numerical {
        scenario: String,
        #[source]
        source: NumericalError,
    },
    #[error("scenario `{scenario}`: precondition violated: {message}")]
    PreconditionViolated { scenario: String, message: String },
    #[error("{path}: {message}")]
    Output { path: String, message: String },
}

impl HarnessError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::PreconditionViolated { .. } | HarnessError::Output { .. } => 1,
            HarnessError::Numerical { .. } => 2,
        }
    }
}

trait Context<T> {
    fn scenario(self, name: &str) -> Result<T, HarnessError>;
}

impl<T, E: Into<NumericalError>> Context<T> for Result<T, E> {
    fn scenario(self, name: &str) -> Result<T, HarnessError> {
        self.map_err(|e| HarnessError::Numerical {
            scenario: name.to_string(),
            source: e.into(),
        })
    }
}

/// Predicted versus fitted coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub coefficient: String,
    pub predicted: f64,
    pub fitted: f64,
    pub absolute_error: f64,
    /// `|predicted - fitted| / max(|fitted|, 1e-12)`.
    pub relative_error: f64,
}

impl Agreement {
    pub fn new(coefficient: &str, predicted: f64, fitted: f64) -> Self {
        let absolute_error = (predicted - fitted).abs();
        Self {
            coefficient: coefficient.to_string(),
            predicted,
            fitted,
            absolute_error,
            relative_error: absolute_error / fitted.abs().max(RELATIVE_FLOOR),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seeds {
    /// Seed of a random scenario T1.
    pub t_seed: Option<u64>,
    /// Seed of the demon search or probe.
    pub search_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub mode: Mode,
    pub d_a: usize,
    pub d_b: usize,
    pub tolerances: Tolerances,
    pub seeds: Seeds,
    pub lambda_grid: Option<Vec<f64>>,
    pub search_lambda: Option<f64>,
    pub verdict: GuaranteeVerdict,
    pub prediction: Option<PerturbativePrediction>,
    /// Energy-conserving lambda^2 coefficient for thermal scenarios.
    pub thermal_coeff: Option<f64>,
    pub fit: Option<SweepFit>,
    pub agreements: Vec<Agreement>,
    pub demon: Option<DemonResult>,
    pub probe: Option<ProbeResult>,
    /// Set when a search found a decrease under a strict-increase verdict.
    pub guarantee_violation: Option<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| output_error(path, e))
    }

    /// Writes `lambda,delta_s_exact,model_value,residual` rows.
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let Some(fit) = &self.fit else {
            return Err(HarnessError::Output {
                path: path.display().to_string(),
                message: format!("mode `{}` produces no sweep rows", self.mode),
            });
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
        for row in &fit.rows {
            w.serialize(row).map_err(|e| output_error(path, e))?;
        }
        w.flush().map_err(|e| output_error(path, e))
    }
}

fn output_error(path: &Path, e: impl fmt::Display) -> HarnessError {
    HarnessError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} ({}), d_a = {}, d_b = {}", self.scenario, self.mode, self.d_a, self.d_b)?;
        let t = &self.tolerances;
        writeln!(
            f,
            "  tolerances: kernel {:e}, degeneracy {:e}, commutator {:e}",
            t.kernel_tol, t.degen_tol, t.commutator_tol
        )?;
        if let Some(s) = self.seeds.t_seed {
            writeln!(f, "  T1 seed: {s}")?;
        }
        if let Some(s) = self.seeds.search_seed {
            writeln!(f, "  search seed: {s}")?;
        }
        let v = &self.verdict;
        writeln!(
            f,
            "  verdict: {:?} (kernel {}, commutation {}, T mixes kernel {}, T nontrivial on B {})",
            v.overall, v.kernel_nonempty, v.commutation_ok, v.t_mixes_kernel, v.t_nontrivial_on_b
        )?;
        if let Some(p) = &self.prediction {
            writeln!(f, "  branch: {:?}", p.branch)?;
            writeln!(f, "  predicted a = {}", opt(p.order1_coeff))?;
            writeln!(f, "  predicted b = {}", opt(p.log_coeff))?;
            writeln!(f, "  predicted c = {}", opt(p.order2_coeff))?;
            if p.nonkernel_pair_coeff.is_some() {
                writeln!(f, "  non-kernel pair term = {}", opt(p.nonkernel_pair_coeff))?;
            }
            if !p.excluded_pairs.is_empty() {
                writeln!(f, "  degenerate pairs excluded: {:?}", p.excluded_pairs)?;
            }
            for n in &p.notes {
                writeln!(f, "  note: {n}")?;
            }
        }
        if self.thermal_coeff.is_some() {
            writeln!(f, "  thermal c = {}", opt(self.thermal_coeff))?;
        }
        if let Some(fit) = &self.fit {
            writeln!(
                f,
                "  fit: a = {:.6e}, b = {:.6e}, c = {:.6e}, max residual {:.3e}, condition {:.3e}",
                fit.a, fit.b, fit.c, fit.residual_max, fit.condition_estimate
            )?;
        }
        for a in &self.agreements {
            writeln!(
                f,
                "  {}: predicted {:.6e}, fitted {:.6e}, abs err {:.3e}, rel err {:.3e}",
                a.coefficient, a.predicted, a.fitted, a.absolute_error, a.relative_error
            )?;
        }
        if let Some(d) = &self.demon {
            writeln!(
                f,
                "  demon: best dS = {:.6e} at lambda {:e} after {} evaluations, {} restarts",
                d.best_delta_s, d.lambda, d.evaluations, d.restarts
            )?;
        }
        if let Some(p) = &self.probe {
            writeln!(
                f,
                "  probe ({:?}): min dS = {:.6e} over {} samples at lambda {:e} (sample {}, seed {})",
                p.family, p.min_delta_s, p.samples, p.lambda, p.argmin_index, p.argmin_seed
            )?;
        }
        if let Some(v) = &self.guarantee_violation {
            writeln!(f, "  GUARANTEE VIOLATION: {v}")?;
        }
        Ok(())
    }
}

/// A validated configuration with its state and T1 built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub state: BipartiteState,
    pub t1: ComplexMatrix,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let state = config.build_state()?;
        let t1 = config.build_t1()?;
        Ok(Self { config, state, t1 })
    }
}

/// Runs the pipeline for the configured mode.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Report, HarnessError> {
    let sc = Scenario::new(config.clone())?;
    let cfg = &sc.config;
    let name = cfg.name.as_str();
    let tols = cfg.tolerances;
    let verdict = criteria::classify_with(&sc.state, &sc.t1, &tols).scenario(name)?;
    let searching = matches!(cfg.mode, Mode::Demon | Mode::Probe);
    let mut report = Report {
        scenario: cfg.name.clone(),
        mode: cfg.mode,
        d_a: cfg.d_a,
        d_b: cfg.d_b,
        tolerances: tols,
        seeds: Seeds {
            t_seed: cfg.t_seed(),
            search_seed: searching.then_some(cfg.seed),
        },
        lambda_grid: (cfg.mode == Mode::Sweep).then(|| cfg.lambda_grid.clone()),
        search_lambda: searching.then_some(cfg.search_lambda),
        verdict,
        prediction: None,
        thermal_coeff: None,
        fit: None,
        agreements: Vec::new(),
        demon: None,
        probe: None,
        guarantee_violation: None,
    };
    if cfg.mode == Mode::Check {
        return Ok(report);
    }

    let zero = ComplexMatrix::zeros(sc.t1.dim());
    let pair = smatrix::complete_second_order(&sc.t1, &zero, cfg.d_a, cfg.d_b).scenario(name)?;
    let prediction = perturb::predict(&sc.state, &pair, &tols).scenario(name)?;
    if let Some((ea, beta, b_index, eb)) = cfg.thermal_data() {
        report.thermal_coeff = Some(perturb::thermal_delta_s(ea, beta, b_index, eb, &sc.t1).scenario(name)?);
    }

    match cfg.mode {
        Mode::Sweep => {
            let fit = oracle::sweep_and_fit(&sc.state, &sc.t1, &cfg.lambda_grid).scenario(name)?;
            report.agreements = agreements(&prediction, report.thermal_coeff, &fit);
            report.fit = Some(fit);
        }
        Mode::Demon => {
            let d = demon_search(&sc.state, cfg.search_lambda, cfg.budget, cfg.seed).scenario(name)?;
            if report.verdict.overall == Overall::StrictIncrease && d.best_delta_s < -VIOLATION_TOL {
                report.guarantee_violation = Some(format!(
                    "demon found dS = {:e} below -{VIOLATION_TOL:e}",
                    d.best_delta_s
                ));
            }
            report.demon = Some(d);
        }
        Mode::Probe => {
            if report.verdict.overall == Overall::NoGuarantee {
                return Err(HarnessError::PreconditionViolated {
                    scenario: name.to_string(),
                    message: "probe requires a state satisfying the kernel and commutation conditions".into(),
                });
            }
            let p = guarantee_probe(
                &sc.state,
                cfg.probe_family,
                cfg.search_lambda,
                cfg.samples,
                cfg.seed,
                tols.kernel_tol,
            )
            .scenario(name)?;
            if report.verdict.overall == Overall::StrictIncrease && p.min_delta_s < -VIOLATION_TOL {
                report.guarantee_violation = Some(format!(
                    "probe found dS = {:e} below -{VIOLATION_TOL:e} (sample {}, seed {})",
                    p.min_delta_s, p.argmin_index, p.argmin_seed
                ));
            }
            report.probe = Some(p);
        }
        Mode::Check | Mode::Predict => {}
    }
    report.prediction = Some(prediction);
    Ok(report)
}

fn agreements(p: &PerturbativePrediction, thermal: Option<f64>, fit: &SweepFit) -> Vec<Agreement> {
    let mut out = Vec::new();
    if let Some(a) = p.order1_coeff {
        out.push(Agreement::new("a", a, fit.a));
    }
    if let Some(b) = p.log_coeff {
        out.push(Agreement::new("b", b, fit.b));
    }
    if let Some(c) = p.order2_coeff {
        out.push(Agreement::new("c", c, fit.c));
    }
    if let Some(c) = thermal {
        out.push(Agreement::new("c_thermal", c, fit.c));
    }
    out
}

/// Runs every built-in scenario concurrently; results keep library order.
pub fn run_suite() -> Vec<(String, Result<Report, HarnessError>)> {
    library::builtins()
        .into_par_iter()
        .map(|cfg| (cfg.name.clone(), run_scenario(&cfg)))
        .collect()
}

/// Loads a scenario from a file, or from the library when `spec` has the
/// form `builtin:<name>`.
pub fn load_scenario(spec: &str) -> Result<ScenarioConfig, ConfigError> {
    match spec.strip_prefix("builtin:") {
        Some(name) => library::builtin(name),
        None => ScenarioConfig::load(Path::new(spec)),
    }
}
