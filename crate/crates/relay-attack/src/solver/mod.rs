//! Backend-independent solve interface with a HiGHS backend and an optional
//! SCIP backend loaded at runtime.

mod highs;
mod scip;

pub use highs::HighsBackend;
pub use scip::ScipBackend;

use crate::model::{AlgebraicModel, ModelError, Role, Sense, VarId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

/// Environment variable naming the default backend (`highs` or `scip`).
pub const SOLVER_ENV: &str = "RELAY_ATTACK_SOLVER";
/// Directory that receives an LP dump of any model whose solve fails.
pub const DUMP_ENV: &str = "RELAY_ATTACK_DUMP_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    IndicatorConstraints,
    TargetCutoff,
    WarmStart,
    BasicSolutions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emphasis {
    #[default]
    Default,
    FindFeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub time_limit_s: f64,
    /// Stop once the incumbent reaches this value (maximization) or drops to
    /// it (minimization).
    pub target_objective: Option<f64>,
    pub emphasis: Emphasis,
    pub warm_start: BTreeMap<VarId, f64>,
    pub require_basic_solution: bool,
    pub thread_count: usize,
    pub random_seed: u64,
    pub mip_gap_tol: f64,
    pub feasibility_tol: f64,
    pub log_file: Option<PathBuf>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit_s: 14400.0,
            target_objective: None,
            emphasis: Emphasis::Default,
            warm_start: BTreeMap::new(),
            require_basic_solution: false,
            thread_count: 1,
            random_seed: 0,
            mip_gap_tol: 1e-4,
            feasibility_tol: 1e-6,
            log_file: None,
        }
    }
}

impl SolveOptions {
    pub fn with_time_limit(mut self, s: f64) -> Self {
        self.time_limit_s = s;
        self
    }

    pub fn basic() -> Self {
        SolveOptions { require_basic_solution: true, ..Default::default() }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.time_limit_s > 0.0) {
            return Err(SolverError::Options(format!("time limit must be positive, got {}", self.time_limit_s)));
        }
        if self.thread_count == 0 {
            return Err(SolverError::Options("thread count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    FeasibleTargetReached,
    Infeasible,
    Unbounded,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleTimeLimit | SolveStatus::FeasibleTargetReached)
    }
}

/// Row duals and column reduced costs of a basic LP solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualValues {
    pub rows: Vec<f64>,
    pub columns: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub backend: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub wall_time_s: f64,
    /// Primal values indexed by variable id.
    #[serde(skip)]
    pub values: Vec<f64>,
    #[serde(skip)]
    pub duals: Option<DualValues>,
    /// (seconds since start, objective) for each improving incumbent.
    pub incumbents: Vec<(f64, f64)>,
    pub message: Option<String>,
}

impl SolveResult {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn value_of(&self, m: &AlgebraicModel, role: Role, index: usize) -> Option<f64> {
        m.var(role, index).and_then(|v| self.values.get(v.0).copied())
    }

    /// Largest absolute row dual or reduced cost.
    pub fn max_abs_dual(&self) -> Option<f64> {
        self.duals
            .as_ref()
            .map(|d| d.rows.iter().chain(&d.columns).fold(0.0f64, |a, x| a.max(x.abs())))
    }

    /// First time the incumbent reached `target` (maximization).
    pub fn time_to_reach(&self, target: f64, tol: f64) -> Option<f64> {
        self.incumbents.iter().find(|(_, z)| *z >= target - tol).map(|(t, _)| *t)
    }

    fn failed(backend: &str, status: SolveStatus, message: String, wall: f64) -> Self {
        SolveResult {
            backend: backend.to_string(),
            status,
            objective: f64::NAN,
            best_bound: f64::NAN,
            gap: f64::INFINITY,
            wall_time_s: wall,
            values: Vec::new(),
            duals: None,
            incumbents: Vec::new(),
            message: Some(message),
        }
    }
}

/// |bound − objective| / max(1e−10, |objective|), infinite unless both are finite.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    if objective.is_finite() && bound.is_finite() {
        (bound - objective).abs() / objective.abs().max(1e-10)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("backend {backend} does not support {capability:?}")]
    Unsupported { backend: String, capability: Capability },
    #[error("solver crashed: {0}")]
    Crash(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("invalid model: {0}")]
    InvalidModel(#[from] ModelError),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("cannot load solver library: {0}")]
    Load(String),
    #[error("unknown backend {0:?}; expected highs or scip")]
    UnknownBackend(String),
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn capabilities(&self) -> BTreeSet<Capability>;
    /// Solve without the common checks. Use [`solve`] instead.
    fn solve_raw(&self, model: &AlgebraicModel, opts: &SolveOptions) -> Result<SolveResult, SolverError>;

    /// Validate, check capabilities, solve, and dump the model on failure.
    fn solve(&self, model: &AlgebraicModel, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
        solve_checked(self, model, opts)
    }
}

fn solve_checked<B: Backend + ?Sized>(
    backend: &B,
    model: &AlgebraicModel,
    opts: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    model.validate()?;
    opts.validate()?;
    let caps = backend.capabilities();
    if !model.indicators().is_empty() && !caps.contains(&Capability::IndicatorConstraints) {
        return Err(SolverError::Unsupported {
            backend: backend.name().to_string(),
            capability: Capability::IndicatorConstraints,
        });
    }
    if model.n_vars() == 0 {
        return Ok(solve_empty(backend.name(), model));
    }
    let out = backend.solve_raw(model, opts);
    let failed = match &out {
        Ok(r) => r.status == SolveStatus::Error,
        Err(_) => true,
    };
    if failed {
        dump_model(model);
    }
    out
}

fn solve_empty(name: &str, model: &AlgebraicModel) -> SolveResult {
    let start = Instant::now();
    let feasible = model.constraints().iter().all(|c| match c.sense {
        Sense::Le => 0.0 <= c.rhs,
        Sense::Ge => 0.0 >= c.rhs,
        Sense::Eq => c.rhs == 0.0,
    });
    if !feasible {
        return SolveResult::failed(name, SolveStatus::Infeasible, "empty model with violated rows".into(), 0.0);
    }
    let z = model.obj_constant();
    SolveResult {
        backend: name.to_string(),
        status: SolveStatus::Optimal,
        objective: z,
        best_bound: z,
        gap: 0.0,
        wall_time_s: start.elapsed().as_secs_f64(),
        values: Vec::new(),
        duals: Some(DualValues { rows: vec![0.0; model.constraints().len()], columns: Vec::new() }),
        incumbents: vec![(0.0, z)],
        message: None,
    }
}

fn dump_model(model: &AlgebraicModel) {
    let Some(dir) = std::env::var_os(DUMP_ENV) else { return };
    let dir = PathBuf::from(dir);
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let path = dir.join(format!("{}-{stamp}.lp", model.name));
    if std::fs::create_dir_all(&dir).is_ok() {
        let _ = std::fs::write(path, model.to_lp_string());
    }
}

/// Backend by name.
pub fn backend_by_name(name: &str) -> Result<Box<dyn Backend>, SolverError> {
    match name.to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(HighsBackend::new())),
        "scip" => Ok(Box::new(ScipBackend::load()?)),
        other => Err(SolverError::UnknownBackend(other.to_string())),
    }
}

/// The backend named by `RELAY_ATTACK_SOLVER`, HiGHS when unset.
///
/// Panics when the variable names a backend that cannot be loaded.
pub fn default_backend() -> Box<dyn Backend> {
    try_default_backend().unwrap_or_else(|e| panic!("{SOLVER_ENV}: {e}"))
}

pub fn try_default_backend() -> Result<Box<dyn Backend>, SolverError> {
    match std::env::var(SOLVER_ENV) {
        Ok(name) if !name.is_empty() => backend_by_name(&name),
        _ => Ok(Box::new(HighsBackend::new())),
    }
}

/// The default backend if it has `cap`, otherwise any loadable backend that does.
pub fn backend_with(cap: Capability) -> Option<Box<dyn Backend>> {
    if let Ok(b) = try_default_backend() {
        if b.capabilities().contains(&cap) {
            return Some(b);
        }
    }
    ["highs", "scip"]
        .iter()
        .filter_map(|n| backend_by_name(n).ok())
        .find(|b| b.capabilities().contains(&cap))
}
