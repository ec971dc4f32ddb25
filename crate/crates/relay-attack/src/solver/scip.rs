use super::{relative_gap, Backend, Capability, Emphasis, SolveOptions, SolveResult, SolveStatus, SolverError};
use crate::model::{AlgebraicModel, VarKind};
use libloading::os::unix::{Library, Symbol, RTLD_GLOBAL, RTLD_NOW};
use std::collections::{BTreeSet, HashSet};
use std::ffi::{c_char, c_int, c_longlong, c_uint, c_void, CString};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

/// Path of the SCIP shared library, overriding discovery.
pub const SCIP_LIB_ENV: &str = "RELAY_ATTACK_SCIP_LIB";

type Scip = c_void;
type Sol = c_void;
type Var = c_void;
type Ret = c_int;

const SCIP_OKAY: Ret = 1;
const PARAMSETTING_AGGRESSIVE: c_int = 1;

/// Termination states we distinguish. The numeric codes moved in SCIP 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    InfOrUnbd,
    TimeLimit,
    GapLimit,
    PrimalLimit,
    UserInterrupt,
    Other(c_int),
}

fn decode_status(major: c_int, code: c_int) -> Status {
    if major >= 10 {
        match code {
            1 => Status::Optimal,
            2 => Status::Infeasible,
            3 => Status::Unbounded,
            4 => Status::InfOrUnbd,
            19 => Status::UserInterrupt,
            23 => Status::TimeLimit,
            25 => Status::GapLimit,
            26 => Status::PrimalLimit,
            c => Status::Other(c),
        }
    } else {
        match code {
            1 => Status::UserInterrupt,
            5 => Status::TimeLimit,
            7 => Status::GapLimit,
            8 => Status::PrimalLimit,
            13 => Status::Optimal,
            14 => Status::Infeasible,
            15 => Status::Unbounded,
            16 => Status::InfOrUnbd,
            c => Status::Other(c),
        }
    }
}

struct Api {
    create: unsafe extern "C" fn(*mut *mut Scip) -> Ret,
    free: unsafe extern "C" fn(*mut *mut Scip) -> Ret,
    include_default_plugins: unsafe extern "C" fn(*mut Scip) -> Ret,
    read_prob: unsafe extern "C" fn(*mut Scip, *const c_char, *const c_char) -> Ret,
    read_sol: unsafe extern "C" fn(*mut Scip, *const c_char) -> Ret,
    set_real: unsafe extern "C" fn(*mut Scip, *const c_char, f64) -> Ret,
    set_int: unsafe extern "C" fn(*mut Scip, *const c_char, c_int) -> Ret,
    set_longint: unsafe extern "C" fn(*mut Scip, *const c_char, c_longlong) -> Ret,
    set_quiet: unsafe extern "C" fn(*mut Scip, c_uint),
    set_logfile: unsafe extern "C" fn(*mut Scip, *const c_char),
    set_heuristics: unsafe extern "C" fn(*mut Scip, c_int, c_uint) -> Ret,
    solve: unsafe extern "C" fn(*mut Scip) -> Ret,
    status: unsafe extern "C" fn(*mut Scip) -> c_int,
    best_sol: unsafe extern "C" fn(*mut Scip) -> *mut Sol,
    n_sols: unsafe extern "C" fn(*mut Scip) -> c_int,
    sols: unsafe extern "C" fn(*mut Scip) -> *mut *mut Sol,
    find_var: unsafe extern "C" fn(*mut Scip, *const c_char) -> *mut Var,
    sol_val: unsafe extern "C" fn(*mut Scip, *mut Sol, *mut Var) -> f64,
    sol_obj: unsafe extern "C" fn(*mut Scip, *mut Sol) -> f64,
    sol_time: unsafe extern "C" fn(*mut Scip, *mut Sol) -> f64,
    dual_bound: unsafe extern "C" fn(*mut Scip) -> f64,
    major: c_int,
    _libs: Vec<Library>,
}

impl Api {
    fn open(path: &Path) -> Result<Api, String> {
        let mut libs = preload_siblings(path);
        // SAFETY: loading a shared library runs its initializers; SCIP has no
        // unusual ones.
        let lib = unsafe { Library::open(Some(path), RTLD_NOW | RTLD_GLOBAL) }.map_err(|e| format!("{}: {e}", path.display()))?;
        macro_rules! sym {
            ($name:literal) => {{
                // SAFETY: the signature matches the SCIP 8+ C API.
                let s: Symbol<_> = unsafe { lib.get(concat!($name, "\0").as_bytes()) }.map_err(|e| format!("{}: {e}", $name))?;
                *s
            }};
        }
        let api = Api {
            create: sym!("SCIPcreate"),
            free: sym!("SCIPfree"),
            include_default_plugins: sym!("SCIPincludeDefaultPlugins"),
            read_prob: sym!("SCIPreadProb"),
            read_sol: sym!("SCIPreadSol"),
            set_real: sym!("SCIPsetRealParam"),
            set_int: sym!("SCIPsetIntParam"),
            set_longint: sym!("SCIPsetLongintParam"),
            set_quiet: sym!("SCIPsetMessagehdlrQuiet"),
            set_logfile: sym!("SCIPsetMessagehdlrLogfile"),
            set_heuristics: sym!("SCIPsetHeuristics"),
            solve: sym!("SCIPsolve"),
            status: sym!("SCIPgetStatus"),
            best_sol: sym!("SCIPgetBestSol"),
            n_sols: sym!("SCIPgetNSols"),
            sols: sym!("SCIPgetSols"),
            find_var: sym!("SCIPfindVar"),
            sol_val: sym!("SCIPgetSolVal"),
            sol_obj: sym!("SCIPgetSolOrigObj"),
            sol_time: sym!("SCIPgetSolTime"),
            dual_bound: sym!("SCIPgetDualbound"),
            major: {
                let f: unsafe extern "C" fn() -> c_int = sym!("SCIPmajorVersion");
                unsafe { f() }
            },
            _libs: Vec::new(),
        };
        libs.push(lib);
        Ok(Api { _libs: libs, ..api })
    }
}

/// Bundled wheels ship libgfortran and friends next to SCIP without an rpath
/// the loader honours, so open them globally first. Order is unknown, so
/// retry until no more progress is made.
fn preload_siblings(path: &Path) -> Vec<Library> {
    let Some(dir) = path.parent() else { return Vec::new() };
    let Ok(entries) = std::fs::read_dir(dir) else { return Vec::new() };
    let mut pending: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p != path && p.file_name().is_some_and(|n| n.to_string_lossy().contains(".so")))
        .collect();
    pending.sort();
    let mut loaded = Vec::new();
    loop {
        let before = pending.len();
        pending.retain(|p| match unsafe { Library::open(Some(p), RTLD_NOW | RTLD_GLOBAL) } {
            Ok(l) => {
                loaded.push(l);
                false
            }
            Err(_) => true,
        });
        if pending.is_empty() || pending.len() == before {
            return loaded;
        }
    }
}

fn candidates() -> Vec<PathBuf> {
    if let Some(p) = std::env::var_os(SCIP_LIB_ENV) {
        return vec![PathBuf::from(p)];
    }
    let mut out = vec![PathBuf::from("libscip.so")];
    let roots = ["/usr/local/lib", "/usr/lib", "/opt/conda/lib"];
    for root in roots {
        let Ok(pys) = std::fs::read_dir(root) else { continue };
        for py in pys.filter_map(|e| e.ok()) {
            if !py.file_name().to_string_lossy().starts_with("python3") {
                continue;
            }
            for site in ["dist-packages", "site-packages"] {
                let dir = py.path().join(site).join("pyscipopt.libs");
                let Ok(libs) = std::fs::read_dir(&dir) else { continue };
                let mut found: Vec<PathBuf> = libs
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("libscip")))
                    .collect();
                found.sort();
                out.extend(found);
            }
        }
    }
    out
}

fn load_api() -> Result<Arc<Api>, String> {
    static API: OnceLock<Result<Arc<Api>, String>> = OnceLock::new();
    API.get_or_init(|| {
        let mut errors = Vec::new();
        for path in candidates() {
            match Api::open(&path) {
                Ok(api) => return Ok(Arc::new(api)),
                Err(e) => errors.push(e),
            }
        }
        Err(errors.join("; "))
    })
    .clone()
}

/// SCIP loaded from a shared library at runtime. Supports indicator
/// constraints, target cutoff and partial warm starts.
#[derive(Clone)]
pub struct ScipBackend {
    api: Arc<Api>,
}

impl std::fmt::Debug for ScipBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ScipBackend")
    }
}

impl ScipBackend {
    pub fn load() -> Result<Self, SolverError> {
        load_api().map(|api| ScipBackend { api }).map_err(SolverError::Load)
    }
}

struct Instance<'a> {
    api: &'a Api,
    scip: *mut Scip,
}

impl Drop for Instance<'_> {
    fn drop(&mut self) {
        // SAFETY: created by SCIPcreate and freed once.
        unsafe { (self.api.free)(&mut self.scip) };
    }
}

impl Instance<'_> {
    fn call(&self, code: Ret, what: &str) -> Result<(), SolverError> {
        if code == SCIP_OKAY {
            Ok(())
        } else {
            Err(SolverError::Crash(format!("SCIP {what} returned {code}")))
        }
    }
    fn real(&self, name: &str, v: f64) -> Result<(), SolverError> {
        let c = CString::new(name).expect("param name");
        self.call(unsafe { (self.api.set_real)(self.scip, c.as_ptr(), v) }, name)
    }
    fn int(&self, name: &str, v: c_int) -> Result<(), SolverError> {
        let c = CString::new(name).expect("param name");
        self.call(unsafe { (self.api.set_int)(self.scip, c.as_ptr(), v) }, name)
    }
    fn longint(&self, name: &str, v: i64) -> Result<(), SolverError> {
        let c = CString::new(name).expect("param name");
        self.call(unsafe { (self.api.set_longint)(self.scip, c.as_ptr(), v) }, name)
    }
}

fn cstr(p: &Path) -> Result<CString, SolverError> {
    CString::new(p.to_string_lossy().as_bytes()).map_err(|_| SolverError::Options(format!("path {} contains NUL", p.display())))
}

impl Backend for ScipBackend {
    fn name(&self) -> &str {
        "scip"
    }

    fn capabilities(&self) -> BTreeSet<Capability> {
        [Capability::IndicatorConstraints, Capability::TargetCutoff, Capability::WarmStart].into_iter().collect()
    }

    fn solve_raw(&self, model: &AlgebraicModel, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let api = &*self.api;
        let dir = tempfile::tempdir().map_err(|e| SolverError::Crash(e.to_string()))?;
        let lp_path = dir.path().join("model.lp");
        std::fs::write(&lp_path, model.to_lp_string()).map_err(|e| SolverError::Crash(e.to_string()))?;

        let mut scip: *mut Scip = std::ptr::null_mut();
        // SAFETY: SCIPcreate fills the pointer on success.
        if unsafe { (api.create)(&mut scip) } != SCIP_OKAY || scip.is_null() {
            return Err(SolverError::Crash("SCIPcreate failed".into()));
        }
        let inst = Instance { api, scip };
        inst.call(unsafe { (api.include_default_plugins)(scip) }, "SCIPincludeDefaultPlugins")?;
        match &opts.log_file {
            Some(p) => {
                let c = cstr(p)?;
                unsafe {
                    (api.set_logfile)(scip, c.as_ptr());
                    (api.set_quiet)(scip, 1);
                }
            }
            None => unsafe { (api.set_quiet)(scip, 1) },
        }
        let lp_c = cstr(&lp_path)?;
        inst.call(unsafe { (api.read_prob)(scip, lp_c.as_ptr(), std::ptr::null()) }, "SCIPreadProb")?;

        inst.real("limits/time", opts.time_limit_s)?;
        inst.real("limits/gap", opts.mip_gap_tol)?;
        inst.real("numerics/feastol", opts.feasibility_tol)?;
        inst.int("randomization/randomseedshift", (opts.random_seed % c_int::MAX as u64) as c_int)?;
        inst.int("lp/threads", opts.thread_count.min(64) as c_int)?;
        if let Some(t) = opts.target_objective {
            inst.real("limits/primal", t)?;
        }
        if opts.emphasis == Emphasis::FindFeasible {
            inst.call(unsafe { (api.set_heuristics)(scip, PARAMSETTING_AGGRESSIVE, 1) }, "SCIPsetHeuristics")?;
        }
        if !opts.warm_start.is_empty() {
            // a partial solution: listed values are fixed, the rest is completed
            inst.real("heuristics/completesol/maxunknownrate", 1.0)?;
            inst.longint("heuristics/completesol/maxnodes", 5000)?;
            let known: HashSet<usize> = opts.warm_start.keys().map(|v| v.0).collect();
            let mut sol = String::new();
            for (v, x) in &opts.warm_start {
                let _ = writeln!(sol, "{} {}", model.vars()[v.0].name, x);
            }
            for (i, v) in model.vars().iter().enumerate() {
                if !known.contains(&i) {
                    let _ = writeln!(sol, "{} unknown", v.name);
                }
            }
            if model.obj_constant() != 0.0 {
                sol.push_str("obj_constant 1\n");
            }
            let sol_path = dir.path().join("warm.sol");
            std::fs::write(&sol_path, sol).map_err(|e| SolverError::Crash(e.to_string()))?;
            let c = cstr(&sol_path)?;
            inst.call(unsafe { (api.read_sol)(scip, c.as_ptr()) }, "SCIPreadSol")?;
        }

        inst.call(unsafe { (api.solve)(scip) }, "SCIPsolve")?;
        let wall = start.elapsed().as_secs_f64();
        let code = unsafe { (api.status)(scip) };
        let n_sols = unsafe { (api.n_sols)(scip) }.max(0) as usize;
        let decoded = decode_status(api.major, code);
        let fail = |msg: String| Ok(SolveResult::failed(self.name(), SolveStatus::Error, msg, wall));
        let status = match decoded {
            Status::Optimal | Status::GapLimit => SolveStatus::Optimal,
            Status::PrimalLimit if n_sols > 0 => SolveStatus::FeasibleTargetReached,
            Status::Infeasible => SolveStatus::Infeasible,
            Status::Unbounded => SolveStatus::Unbounded,
            Status::InfOrUnbd => return fail("infeasible or unbounded".into()),
            _ if n_sols > 0 => SolveStatus::FeasibleTimeLimit,
            Status::TimeLimit => return fail("time limit reached without a feasible point".into()),
            Status::UserInterrupt => return fail("interrupted".into()),
            other => return fail(format!("SCIP status {other:?}")),
        };
        if !status.has_solution() {
            return Ok(SolveResult::failed(self.name(), status, format!("SCIP status {code}"), wall));
        }
        let best = unsafe { (api.best_sol)(scip) };
        if best.is_null() {
            return Ok(SolveResult::failed(self.name(), SolveStatus::Error, "no best solution".into(), wall));
        }
        let values: Vec<f64> = model
            .vars()
            .iter()
            .map(|v| {
                let name = CString::new(v.name.as_str()).expect("var name");
                let var = unsafe { (api.find_var)(scip, name.as_ptr()) };
                if var.is_null() {
                    // never mentioned in the file; any value in bounds is optimal
                    return if v.kind == VarKind::Binary { 0.0 } else { v.lb.max(0.0).min(v.ub) };
                }
                unsafe { (api.sol_val)(scip, best, var) }
            })
            .collect();
        let objective = unsafe { (api.sol_obj)(scip, best) };
        let mut best_bound = unsafe { (api.dual_bound)(scip) };
        if status == SolveStatus::Optimal && (best_bound - objective).abs() <= 1e-6 * objective.abs().max(1.0) {
            best_bound = objective;
        }
        let mut found: Vec<(f64, f64)> = {
            let sols = unsafe { (api.sols)(scip) };
            (0..n_sols)
                .map(|i| {
                    let s = unsafe { *sols.add(i) };
                    unsafe { ((api.sol_time)(scip, s), (api.sol_obj)(scip, s)) }
                })
                .collect()
        };
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut incumbents = Vec::new();
        let maximize = model.sense == crate::model::ObjSense::Maximize;
        for (t, z) in found {
            let better = match incumbents.last() {
                None => true,
                Some(&(_, prev)) => if maximize { z > prev } else { z < prev },
            };
            if better {
                incumbents.push((t, z));
            }
        }
        drop(inst);
        Ok(SolveResult {
            backend: self.name().to_string(),
            status,
            objective,
            best_bound,
            gap: relative_gap(objective, best_bound),
            wall_time_s: wall,
            values,
            duals: None,
            incumbents,
            message: None,
        })
    }
}
