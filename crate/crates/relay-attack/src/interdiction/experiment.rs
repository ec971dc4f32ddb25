//! Budget sweeps over a set of instances, written to a resumable CSV.

use super::{heuristic_m_from_duals, nflb, run_comparison, ComparisonSpec, Formulation, InterdictionError, NflbReport};
use crate::netmodel::{budget_from_percentage, load_instance, Instance, ParseOptions, RelayPolicy};
use crate::solver::{Backend, SolveOptions, SolveStatus};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Budget percentages of the standard sweep.
pub const DEFAULT_BUDGETS: [f64; 10] = [1.0, 3.0, 5.0, 7.0, 10.0, 13.0, 15.0, 20.0, 25.0, 30.0];

pub const CSV_HEADER: &str = "instance,budget_pct,U,best_known_lb_pu,nflb_pu,nflb_time_s,eq8_value_pu,eq8_time_s,eq8_gap,eq8_time_to_nflb_s,eq7_time_to_nflb_s,status";

const RESULTS_FILE: &str = "results.csv";

/// How eq8 gets its M.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MPolicy {
    /// Ceiling of the largest step-2 dual.
    #[default]
    FromDuals,
    Fixed(f64),
}

fn default_budgets() -> Vec<f64> {
    DEFAULT_BUDGETS.to_vec()
}
fn default_formulations() -> Vec<Formulation> {
    vec![Formulation::Eq4]
}
fn default_time_limit() -> f64 {
    14400.0
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Vec<PathBuf>,
    #[serde(default)]
    pub relay_policy: RelayPolicy,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    /// eq4 always runs since every row needs the bound; listing eq7 or eq8
    /// adds those columns.
    #[serde(default = "default_formulations")]
    pub formulations: Vec<Formulation>,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    #[serde(default)]
    pub m_policy: MPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub jobs: usize,
    /// Start eq8 from the bound's attack.
    #[serde(default)]
    pub warm_start_eq8: bool,
    /// Stop eq8 once it matches the bound instead of running to the limit.
    #[serde(default)]
    pub cutoff_at_nflb: bool,
    #[serde(default)]
    pub parse: ParseOptions,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, InterdictionError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| InterdictionError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file. Relative paths are taken relative to its directory.
    pub fn from_file(path: &Path) -> Result<Self, InterdictionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| InterdictionError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.instances.iter_mut().chain(std::iter::once(&mut cfg.output_dir)) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), InterdictionError> {
        let bad = |m: &str| Err(InterdictionError::Config(m.to_string()));
        if self.instances.is_empty() {
            return bad("at least one instance is required");
        }
        if self.budgets.is_empty() {
            return bad("at least one budget is required");
        }
        if let Some(b) = self.budgets.iter().find(|b| !(0.0..=100.0).contains(*b)) {
            return Err(InterdictionError::Config(format!("budget {b}% is outside [0, 100]")));
        }
        if !(self.time_limit_s > 0.0) {
            return bad("time limit must be positive");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        if let MPolicy::Fixed(m) = self.m_policy {
            if !(m >= 1.0) {
                return Err(InterdictionError::Config(format!("fixed M must be at least 1, got {m}")));
            }
        }
        Ok(())
    }
}

fn opt_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    match s.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(t) => t.parse::<f64>().map(Some).map_err(serde::de::Error::custom),
    }
}

/// One CSV row: an (instance, budget) cell. Power values are in per unit at
/// full precision; empty fields mean "not run" or "failed".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instance: String,
    pub budget_pct: f64,
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(deserialize_with = "opt_f64")]
    pub best_known_lb_pu: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub nflb_pu: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub nflb_time_s: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub eq8_value_pu: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub eq8_time_s: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub eq8_gap: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub eq8_time_to_nflb_s: Option<f64>,
    #[serde(deserialize_with = "opt_f64")]
    pub eq7_time_to_nflb_s: Option<f64>,
    pub status: String,
    /// Not part of the CSV; feeds the running best-known bound.
    #[serde(skip)]
    pub eq7_value_pu: Option<f64>,
}

impl ComparisonRow {
    /// 100 · value / best-known lower bound.
    pub fn quality_pct(&self, value: f64) -> Option<f64> {
        self.best_known_lb_pu.filter(|b| *b > 0.0).map(|b| 100.0 * value / b)
    }

    /// No formulation in the cell ended in an error.
    pub fn complete(&self) -> bool {
        !self.status.contains("error")
    }

    fn best_here(&self) -> Option<f64> {
        [self.nflb_pu, self.eq8_value_pu, self.eq7_value_pu, self.best_known_lb_pu]
            .into_iter()
            .flatten()
            .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))))
    }
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ComparisonRow>, InterdictionError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(InterdictionError::Parse(format!("unexpected results header {:?}", header.join(","))));
    }
    rd.deserialize().map(|r| r.map_err(InterdictionError::from)).collect()
}

fn write_results(path: &Path, rows: &[ComparisonRow]) -> Result<(), InterdictionError> {
    let io = |source| InterdictionError::Io { path: path.display().to_string(), source };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(tmp.as_file_mut());
        w.write_record(CSV_HEADER.split(','))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(io)?;
    }
    tmp.as_file_mut().flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<ComparisonRow>,
    pub new_cells: usize,
    pub skipped_cells: usize,
    pub results_path: PathBuf,
}

#[derive(Serialize)]
struct CellReport<'a> {
    row: &'a ComparisonRow,
    nflb: Option<&'a NflbReport>,
    eq8: Option<&'a super::FormulationRun>,
    eq7: Option<&'a super::FormulationRun>,
    big_m: Option<f64>,
    logs: Vec<PathBuf>,
}

fn file_tag(name: &str, pct: f64) -> String {
    let clean: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
    format!("{clean}_{pct}")
}

fn status_of(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::FeasibleTimeLimit => "feasible_time_limit",
        SolveStatus::FeasibleTargetReached => "feasible_target_reached",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::Error => "error",
    }
}

fn one_line(s: String) -> String {
    s.replace(['\n', '\r'], " ")
}

struct Cell<'a> {
    inst: &'a Instance,
    name: &'a str,
    pct: f64,
}

fn run_cell(
    cfg: &ExperimentConfig,
    cell: &Cell<'_>,
    backend: &dyn Backend,
    indicator_backend: Option<&dyn Backend>,
) -> ComparisonRow {
    let net = &cell.inst.network;
    let relays = &cell.inst.relays;
    let tag = file_tag(cell.name, cell.pct);
    let logs_dir = cfg.output_dir.join("logs");
    let _ = std::fs::create_dir_all(&logs_dir);
    let mut logs = Vec::new();
    let mut opts_for = |what: &str| {
        let log = logs_dir.join(format!("{tag}_{what}.log"));
        logs.push(log.clone());
        SolveOptions { time_limit_s: cfg.time_limit_s, random_seed: cfg.seed, log_file: Some(log), ..Default::default() }
    };
    let mut row = ComparisonRow {
        instance: cell.name.to_string(),
        budget_pct: cell.pct,
        u: 0,
        best_known_lb_pu: None,
        nflb_pu: None,
        nflb_time_s: None,
        eq8_value_pu: None,
        eq8_time_s: None,
        eq8_gap: None,
        eq8_time_to_nflb_s: None,
        eq7_time_to_nflb_s: None,
        status: String::new(),
        eq7_value_pu: None,
    };
    let mut status: Vec<String> = Vec::new();
    let budget = match budget_from_percentage(cell.pct, relays.len()) {
        Ok(b) => b,
        Err(e) => {
            row.status = one_line(format!("eq4:error({e})"));
            return row;
        }
    };
    row.u = budget.count;
    let report = match nflb(backend, net, relays, &budget, &opts_for("eq4")) {
        Ok(r) => {
            status.push(format!("eq4:{}", status_of(r.milp_result.status)));
            row.nflb_pu = Some(r.dcopf_value);
            row.nflb_time_s = Some(r.total_time_s);
            Some(r)
        }
        Err(e) => {
            status.push(one_line(format!("eq4:error({e})")));
            None
        }
    };
    let target = report.as_ref().map(|r| r.dcopf_value);
    let tol = |t: f64| 1e-6 * t.abs().max(1.0);

    let mut eq8_run = None;
    let mut big_m = None;
    if cfg.formulations.contains(&Formulation::Eq8) {
        let m = match cfg.m_policy {
            MPolicy::Fixed(m) => Some(m),
            MPolicy::FromDuals => report.as_ref().and_then(|r| heuristic_m_from_duals(&r.lp_result).ok()).map(|h| h.m),
        };
        big_m = m;
        match m {
            None => status.push("eq8:error(no M available)".into()),
            Some(m) => {
                let spec = ComparisonSpec {
                    big_m: Some(m),
                    target: if cfg.cutoff_at_nflb { target } else { None },
                    warm_start: if cfg.warm_start_eq8 { report.as_ref().map(|r| r.attack.clone()) } else { None },
                };
                match run_comparison(backend, net, relays, &budget, Formulation::Eq8, &spec, &opts_for("eq8")) {
                    Ok(run) => {
                        status.push(format!("eq8:{}", status_of(run.status)));
                        row.eq8_value_pu = Some(run.value);
                        row.eq8_time_s = Some(run.time_s);
                        row.eq8_gap = Some(run.gap);
                        row.eq8_time_to_nflb_s = target.and_then(|t| run.result.time_to_reach(t, tol(t)));
                        eq8_run = Some(run);
                    }
                    Err(e) => status.push(one_line(format!("eq8:error({e})"))),
                }
            }
        }
    }

    let mut eq7_run = None;
    if cfg.formulations.contains(&Formulation::Eq7) {
        match indicator_backend {
            None => status.push("eq7:skipped(no backend with indicator constraints)".into()),
            Some(b) => {
                let spec = ComparisonSpec { big_m: None, target, warm_start: None };
                match run_comparison(b, net, relays, &budget, Formulation::Eq7, &spec, &opts_for("eq7")) {
                    Ok(run) => {
                        status.push(format!("eq7:{}", status_of(run.status)));
                        row.eq7_time_to_nflb_s = target.and_then(|t| run.result.time_to_reach(t, tol(t)));
                        row.eq7_value_pu = Some(run.value);
                        eq7_run = Some(run);
                    }
                    Err(e) => status.push(one_line(format!("eq7:error({e})"))),
                }
            }
        }
    }
    row.status = status.join(";");
    row.best_known_lb_pu = row.best_here();

    let runs_dir = cfg.output_dir.join("runs");
    if std::fs::create_dir_all(&runs_dir).is_ok() {
        let rep = CellReport { row: &row, nflb: report.as_ref(), eq8: eq8_run.as_ref(), eq7: eq7_run.as_ref(), big_m, logs };
        if let Ok(json) = serde_json::to_string_pretty(&rep) {
            let _ = std::fs::write(runs_dir.join(format!("{tag}.json")), json);
        }
    }
    row
}

/// Fold in earlier rows for the same (instance, U) and lift them too.
fn apply_running_max(rows: &mut [ComparisonRow]) {
    let mut best: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for r in rows.iter() {
        if let Some(v) = r.best_here() {
            let e = best.entry((r.instance.clone(), r.u)).or_insert(v);
            *e = e.max(v);
        }
    }
    for r in rows.iter_mut() {
        if let Some(&v) = best.get(&(r.instance.clone(), r.u)) {
            r.best_known_lb_pu = Some(v);
        }
    }
}

/// Run every (instance, budget) cell not already completed in the results
/// file. Failures are recorded in the row's status column.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    backend: &dyn Backend,
    indicator_backend: Option<&dyn Backend>,
) -> Result<SweepSummary, InterdictionError> {
    cfg.validate()?;
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |source| InterdictionError::Io { path: p, source }
    };
    std::fs::create_dir_all(&cfg.output_dir).map_err(io(&cfg.output_dir))?;
    let results_path = cfg.output_dir.join(RESULTS_FILE);
    let previous = match std::fs::read_to_string(&results_path) {
        Ok(text) => parse_results_csv(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io(&results_path)(e)),
    };

    let instances: Vec<Instance> = cfg
        .instances
        .iter()
        .map(|p| load_instance(p, &cfg.parse).map_err(|e| InterdictionError::Parse(e.to_string())))
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = instances
        .iter()
        .zip(&cfg.instances)
        .map(|(i, p)| i.name.clone().unwrap_or_else(|| p.display().to_string()))
        .collect();

    let key = |name: &str, pct: f64| (name.to_string(), pct.to_bits());
    let done: BTreeMap<_, _> = previous.iter().filter(|r| r.complete()).map(|r| (key(&r.instance, r.budget_pct), ())).collect();
    let mut cells = Vec::new();
    let mut skipped = 0;
    for (inst, name) in instances.iter().zip(&names) {
        for &pct in &cfg.budgets {
            if done.contains_key(&key(name, pct)) {
                skipped += 1;
            } else {
                cells.push(Cell { inst, name, pct });
            }
        }
    }
    // canonical order: configured cells first, then anything else from earlier runs
    let mut order: Vec<(String, u64)> = Vec::new();
    for name in &names {
        for &pct in &cfg.budgets {
            order.push(key(name, pct));
        }
    }
    let rank = |r: &ComparisonRow| order.iter().position(|k| *k == key(&r.instance, r.budget_pct)).unwrap_or(usize::MAX);

    let ledger = Mutex::new(previous.into_iter().filter(|r| r.complete()).collect::<Vec<_>>());
    let commit = |row: ComparisonRow| -> Result<(), InterdictionError> {
        let mut rows = ledger.lock().expect("ledger lock");
        rows.retain(|r| key(&r.instance, r.budget_pct) != key(&row.instance, row.budget_pct));
        rows.push(row);
        rows.sort_by_key(|r| rank(r));
        apply_running_max(&mut rows);
        write_results(&results_path, &rows)
    };
    let new_cells = cells.len();
    if cfg.jobs <= 1 {
        for cell in &cells {
            commit(run_cell(cfg, cell, backend, indicator_backend))?;
        }
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| InterdictionError::Config(e.to_string()))?;
        pool.install(|| cells.par_iter().try_for_each(|cell| commit(run_cell(cfg, cell, backend, indicator_backend))))?;
    }
    if new_cells == 0 && !results_path.exists() {
        write_results(&results_path, &[])?;
    }
    let rows = ledger.into_inner().expect("ledger lock");
    Ok(SweepSummary { rows, new_cells, skipped_cells: skipped, results_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_policy() {
        let cfg = ExperimentConfig::from_toml_str("instances = [\"a.json\"]\n").unwrap();
        assert_eq!(cfg.budgets, DEFAULT_BUDGETS.to_vec());
        assert_eq!(cfg.formulations, vec![Formulation::Eq4]);
        assert_eq!(cfg.time_limit_s, 14400.0);
        assert_eq!(cfg.m_policy, MPolicy::FromDuals);
        let cfg = ExperimentConfig::from_toml_str(
            "instances = [\"a.json\"]\nbudgets = [5]\nformulations = [\"eq4\", \"eq8\"]\nm_policy = { fixed = 2.0 }\n",
        )
        .unwrap();
        assert_eq!(cfg.m_policy, MPolicy::Fixed(2.0));
    }

    #[test]
    fn config_rejections() {
        for bad in [
            "instances = []",
            "instances = [\"a\"]\nbudgets = []",
            "instances = [\"a\"]\nbudgets = [120]",
            "instances = [\"a\"]\ntime_limit_s = 0",
            "instances = [\"a\"]\nm_policy = { fixed = 0.5 }",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(InterdictionError::Config(_))), "{bad}");
        }
        for bad in ["instances = [\"a\"]\nunknown_key = 1", "instances = "] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(InterdictionError::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let row = ComparisonRow {
            instance: "x".into(),
            budget_pct: 3.0,
            u: 4,
            best_known_lb_pu: Some(14.63),
            nflb_pu: Some(14.63),
            nflb_time_s: Some(0.5),
            eq8_value_pu: None,
            eq8_time_s: None,
            eq8_gap: Some(f64::INFINITY),
            eq8_time_to_nflb_s: None,
            eq7_time_to_nflb_s: None,
            status: "eq4:optimal;eq7:error(a, b)".into(),
            eq7_value_pu: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&p, std::slice::from_ref(&row)).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_results_csv(&text).unwrap();
        assert_eq!(back, vec![row]);
        assert!(!back[0].complete());
        assert!(parse_results_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn running_max_per_instance_and_budget() {
        let mk = |pct: f64, u: usize, v: f64| ComparisonRow {
            instance: "x".into(),
            budget_pct: pct,
            u,
            best_known_lb_pu: None,
            nflb_pu: Some(v),
            nflb_time_s: None,
            eq8_value_pu: None,
            eq8_time_s: None,
            eq8_gap: None,
            eq8_time_to_nflb_s: None,
            eq7_time_to_nflb_s: None,
            status: "eq4:optimal".into(),
            eq7_value_pu: None,
        };
        let mut rows = vec![mk(20.0, 2, 1.0), mk(25.0, 2, 1.5), mk(30.0, 3, 1.2)];
        apply_running_max(&mut rows);
        assert_eq!(rows.iter().map(|r| r.best_known_lb_pu.unwrap()).collect::<Vec<_>>(), vec![1.5, 1.5, 1.2]);
        assert!((rows[0].quality_pct(1.0).unwrap() - 66.666).abs() < 1e-2);
    }
}
