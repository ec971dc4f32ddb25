use super::{relative_gap, Backend, Capability, DualValues, Emphasis, SolveOptions, SolveResult, SolveStatus, SolverError};
use crate::model::{AlgebraicModel, ObjSense, Sense, VarKind};
use highs_sys::*;
use std::collections::BTreeSet;
use std::ffi::{c_char, c_int, c_void, CString};
use std::time::Instant;

/// HiGHS through its C API. Supports target cutoff, warm starts and basic
/// LP solutions; indicator constraints are not available.
#[derive(Debug, Default, Clone, Copy)]
pub struct HighsBackend;

impl HighsBackend {
    pub fn new() -> Self {
        HighsBackend
    }
}

struct Handle(*mut c_void);

impl Drop for Handle {
    fn drop(&mut self) {
        // SAFETY: the pointer came from Highs_create and is destroyed once.
        unsafe { Highs_destroy(self.0) }
    }
}

impl Handle {
    fn opt_bool(&self, name: &str, v: bool) -> Result<(), SolverError> {
        let c = CString::new(name).expect("option name");
        check(unsafe { Highs_setBoolOptionValue(self.0, c.as_ptr(), v as HighsInt) }, name)
    }
    fn opt_int(&self, name: &str, v: i32) -> Result<(), SolverError> {
        let c = CString::new(name).expect("option name");
        check(unsafe { Highs_setIntOptionValue(self.0, c.as_ptr(), v) }, name)
    }
    fn opt_f64(&self, name: &str, v: f64) -> Result<(), SolverError> {
        let c = CString::new(name).expect("option name");
        check(unsafe { Highs_setDoubleOptionValue(self.0, c.as_ptr(), v) }, name)
    }
    fn opt_str(&self, name: &str, v: &str) -> Result<(), SolverError> {
        let c = CString::new(name).expect("option name");
        let s = CString::new(v).map_err(|_| SolverError::Options(format!("{name} contains a NUL byte")))?;
        check(unsafe { Highs_setStringOptionValue(self.0, c.as_ptr(), s.as_ptr()) }, name)
    }
    fn info_int(&self, name: &str) -> Option<i32> {
        let c = CString::new(name).expect("info name");
        let mut v: HighsInt = 0;
        (unsafe { Highs_getIntInfoValue(self.0, c.as_ptr(), &mut v) } == kHighsStatusOk).then_some(v)
    }
    fn info_f64(&self, name: &str) -> Option<f64> {
        let c = CString::new(name).expect("info name");
        let mut v = 0.0;
        (unsafe { Highs_getDoubleInfoValue(self.0, c.as_ptr(), &mut v) } == kHighsStatusOk).then_some(v)
    }
}

fn check(code: HighsInt, what: &str) -> Result<(), SolverError> {
    if code == kHighsStatusError {
        Err(SolverError::Options(format!("HiGHS rejected {what}")))
    } else {
        Ok(())
    }
}

struct CallbackState {
    start: Instant,
    target: Option<f64>,
    maximize: bool,
    reached: bool,
    incumbents: Vec<(f64, f64)>,
}

unsafe extern "C" fn on_event(
    kind: c_int,
    _message: *const c_char,
    out: *const HighsCallbackDataOut,
    input: *mut HighsCallbackDataIn,
    user: *mut c_void,
) {
    if user.is_null() || out.is_null() {
        return;
    }
    // SAFETY: `user` points at the CallbackState owned by solve_raw for the
    // duration of Highs_run; HiGHS passes valid out/in blocks.
    let st = unsafe { &mut *(user as *mut CallbackState) };
    let out = unsafe { &*out };
    if kind == kHighsCallbackMipImprovingSolution {
        st.incumbents.push((st.start.elapsed().as_secs_f64(), out.objective_function_value));
    } else if kind == kHighsCallbackMipInterrupt {
        if let Some(t) = st.target {
            let z = out.mip_primal_bound;
            let hit = z.is_finite() && if st.maximize { z >= t - 1e-9 } else { z <= t + 1e-9 };
            if hit && !input.is_null() {
                unsafe { (*input).user_interrupt = 1 };
                st.reached = true;
            }
        }
    }
}

/// Column-wise copy of the model in the layout HiGHS expects.
struct Csc {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_lower: Vec<f64>,
    row_upper: Vec<f64>,
    start: Vec<HighsInt>,
    index: Vec<HighsInt>,
    value: Vec<f64>,
    integrality: Vec<HighsInt>,
}

fn to_csc(m: &AlgebraicModel) -> Csc {
    let n = m.n_vars();
    let mut cols: Vec<Vec<(HighsInt, f64)>> = vec![Vec::new(); n];
    let mut row_lower = Vec::with_capacity(m.constraints().len());
    let mut row_upper = Vec::with_capacity(m.constraints().len());
    for (r, c) in m.constraints().iter().enumerate() {
        for &(v, a) in &c.terms {
            let col = &mut cols[v.0];
            match col.last_mut() {
                Some(last) if last.0 == r as HighsInt => last.1 += a,
                _ => col.push((r as HighsInt, a)),
            }
        }
        let (lo, hi) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, c.rhs),
            Sense::Ge => (c.rhs, f64::INFINITY),
            Sense::Eq => (c.rhs, c.rhs),
        };
        row_lower.push(lo);
        row_upper.push(hi);
    }
    let mut cost = vec![0.0; n];
    for &(v, a) in m.objective() {
        cost[v.0] += a;
    }
    let (mut start, mut index, mut value) = (Vec::with_capacity(n), Vec::new(), Vec::new());
    for col in &cols {
        start.push(index.len() as HighsInt);
        for &(r, a) in col {
            // Rows were visited in order, so a repeated row can only be the last entry.
            index.push(r);
            value.push(a);
        }
    }
    Csc {
        cost,
        lower: m.vars().iter().map(|v| v.lb).collect(),
        upper: m.vars().iter().map(|v| v.ub).collect(),
        row_lower,
        row_upper,
        start,
        index,
        value,
        integrality: m
            .vars()
            .iter()
            .map(|v| if v.kind == VarKind::Binary { kHighsVarTypeInteger } else { kHighsVarTypeContinuous })
            .collect(),
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn capabilities(&self) -> BTreeSet<Capability> {
        [Capability::TargetCutoff, Capability::WarmStart, Capability::BasicSolutions].into_iter().collect()
    }

    fn solve_raw(&self, model: &AlgebraicModel, opts: &SolveOptions) -> Result<SolveResult, SolverError> {
        let start = Instant::now();
        let mip = model.is_mip();
        let maximize = model.sense == ObjSense::Maximize;
        let csc = to_csc(model);
        let n = model.n_vars();
        let rows = model.constraints().len();
        // SAFETY: Highs_create returns an owned instance released by Handle.
        let h = Handle(unsafe { Highs_create() });
        if h.0.is_null() {
            return Err(SolverError::Crash("Highs_create returned null".into()));
        }
        match &opts.log_file {
            Some(path) => {
                h.opt_bool("output_flag", true)?;
                h.opt_bool("log_to_console", false)?;
                h.opt_str("log_file", &path.to_string_lossy())?;
            }
            None => h.opt_bool("output_flag", false)?,
        }
        h.opt_f64("time_limit", opts.time_limit_s)?;
        h.opt_int("random_seed", (opts.random_seed % i32::MAX as u64) as i32)?;
        h.opt_int("threads", opts.thread_count.min(i32::MAX as usize) as i32)?;
        h.opt_f64("primal_feasibility_tolerance", opts.feasibility_tol)?;
        h.opt_f64("dual_feasibility_tolerance", opts.feasibility_tol)?;
        if mip {
            h.opt_f64("mip_rel_gap", opts.mip_gap_tol)?;
            h.opt_f64("mip_feasibility_tolerance", opts.feasibility_tol)?;
            if opts.emphasis == Emphasis::FindFeasible {
                h.opt_f64("mip_heuristic_effort", 0.3)?;
            }
        } else if opts.require_basic_solution {
            h.opt_str("solver", "simplex")?;
        }
        let sense = if maximize { kHighsObjSenseMaximize } else { kHighsObjSenseMinimize };
        let nnz = csc.index.len() as HighsInt;
        // SAFETY: all arrays have the lengths declared in the call.
        let pass = unsafe {
            if mip {
                Highs_passMip(
                    h.0,
                    n as HighsInt,
                    rows as HighsInt,
                    nnz,
                    kHighsMatrixFormatColwise,
                    sense,
                    model.obj_constant(),
                    csc.cost.as_ptr(),
                    csc.lower.as_ptr(),
                    csc.upper.as_ptr(),
                    csc.row_lower.as_ptr(),
                    csc.row_upper.as_ptr(),
                    csc.start.as_ptr(),
                    csc.index.as_ptr(),
                    csc.value.as_ptr(),
                    csc.integrality.as_ptr(),
                )
            } else {
                Highs_passLp(
                    h.0,
                    n as HighsInt,
                    rows as HighsInt,
                    nnz,
                    kHighsMatrixFormatColwise,
                    sense,
                    model.obj_constant(),
                    csc.cost.as_ptr(),
                    csc.lower.as_ptr(),
                    csc.upper.as_ptr(),
                    csc.row_lower.as_ptr(),
                    csc.row_upper.as_ptr(),
                    csc.start.as_ptr(),
                    csc.index.as_ptr(),
                    csc.value.as_ptr(),
                )
            }
        };
        if pass == kHighsStatusError {
            return Err(SolverError::Crash("HiGHS rejected the model".into()));
        }
        if !opts.warm_start.is_empty() {
            let idx: Vec<HighsInt> = opts.warm_start.keys().map(|v| v.0 as HighsInt).collect();
            let val: Vec<f64> = opts.warm_start.values().copied().collect();
            // SAFETY: idx and val have the same length.
            unsafe { Highs_setSparseSolution(h.0, idx.len() as HighsInt, idx.as_ptr(), val.as_ptr()) };
        }
        let mut state = Box::new(CallbackState {
            start,
            target: opts.target_objective,
            maximize,
            reached: false,
            incumbents: Vec::new(),
        });
        if mip {
            // SAFETY: state outlives every Highs_run below; the handle is
            // dropped before state at the end of this function.
            unsafe {
                Highs_setCallback(h.0, Some(on_event), &mut *state as *mut CallbackState as *mut c_void);
                Highs_startCallback(h.0, kHighsCallbackMipImprovingSolution);
                if opts.target_objective.is_some() {
                    Highs_startCallback(h.0, kHighsCallbackMipInterrupt);
                }
            }
        }
        let run = unsafe { Highs_run(h.0) };
        let mut ms = unsafe { Highs_getModelStatus(h.0) };
        if ms == kHighsModelStatusUnboundedOrInfeasible {
            // presolve cannot tell the two apart; the plain solver can
            h.opt_str("presolve", "off")?;
            unsafe { Highs_run(h.0) };
            ms = unsafe { Highs_getModelStatus(h.0) };
        }
        let wall = start.elapsed().as_secs_f64();
        if run == kHighsStatusError && ms != kHighsModelStatusInfeasible {
            return Ok(SolveResult::failed(self.name(), SolveStatus::Error, format!("HiGHS run failed (model status {ms})"), wall));
        }
        let has_sol = h.info_int("primal_solution_status") == Some(kHighsSolutionStatusFeasible);
        let status = match ms {
            x if x == kHighsModelStatusOptimal => SolveStatus::Optimal,
            x if x == kHighsModelStatusInfeasible => SolveStatus::Infeasible,
            x if x == kHighsModelStatusUnbounded => SolveStatus::Unbounded,
            x if x == kHighsModelStatusInterrupt && has_sol && state.reached => SolveStatus::FeasibleTargetReached,
            x if (x == kHighsModelStatusTimeLimit
                || x == kHighsModelStatusIterationLimit
                || x == kHighsModelStatusSolutionLimit
                || x == kHighsModelStatusInterrupt)
                && has_sol =>
            {
                SolveStatus::FeasibleTimeLimit
            }
            other => {
                let msg = if other == kHighsModelStatusTimeLimit {
                    "time limit reached without a feasible point".to_string()
                } else {
                    format!("HiGHS model status {other}")
                };
                return Ok(SolveResult::failed(self.name(), SolveStatus::Error, msg, wall));
            }
        };
        if !status.has_solution() {
            return Ok(SolveResult::failed(self.name(), status, format!("HiGHS model status {ms}"), wall));
        }
        let mut values = vec![0.0; n];
        let mut col_dual = vec![0.0; n];
        let mut row_value = vec![0.0; rows];
        let mut row_dual = vec![0.0; rows];
        // SAFETY: buffers sized to the model.
        unsafe {
            Highs_getSolution(h.0, values.as_mut_ptr(), col_dual.as_mut_ptr(), row_value.as_mut_ptr(), row_dual.as_mut_ptr())
        };
        let objective = unsafe { Highs_getObjectiveValue(h.0) };
        let mut best_bound = if mip { h.info_f64("mip_dual_bound").unwrap_or(f64::NAN) } else { objective };
        if status == SolveStatus::Optimal && (best_bound - objective).abs() <= 1e-6 * objective.abs().max(1.0) {
            // closed within the solver's absolute gap tolerance
            best_bound = objective;
        }
        let mut message = None;
        let duals = if !mip && opts.require_basic_solution {
            if h.info_int("basis_validity") == Some(kHighsBasisValidityValid) {
                Some(DualValues { rows: row_dual, columns: col_dual })
            } else {
                message = Some("no valid basis; duals withheld".to_string());
                None
            }
        } else {
            None
        };
        let mut incumbents = std::mem::take(&mut state.incumbents);
        if incumbents.is_empty() || !mip {
            incumbents.push((wall, objective));
        }
        drop(h);
        Ok(SolveResult {
            backend: self.name().to_string(),
            status,
            objective,
            best_bound,
            gap: relative_gap(objective, best_bound),
            wall_time_s: wall,
            values,
            duals,
            incumbents,
            message,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConRole, Role};

    fn knapsack(n: usize) -> AlgebraicModel {
        let mut m = AlgebraicModel::new("knap", ObjSense::Maximize);
        let xs: Vec<_> = (0..n).map(|i| m.add_var(Role::Delta, i, VarKind::Binary, 0.0, 1.0)).collect();
        let w: Vec<f64> = (0..n).map(|i| 3.0 + ((i * 7) % 11) as f64).collect();
        let p: Vec<f64> = (0..n).map(|i| 2.0 + ((i * 5) % 13) as f64).collect();
        m.add_constraint(ConRole::Budget, 0, xs.iter().zip(&w).map(|(&x, &a)| (x, a)).collect(), Sense::Le, 40.0);
        m.set_objective(xs.iter().zip(&p).map(|(&x, &c)| (x, c)).collect(), 0.0);
        m
    }

    #[test]
    fn trivial_lp() {
        let mut m = AlgebraicModel::new("box", ObjSense::Minimize);
        m.add_var(Role::Flow, 0, VarKind::Continuous, -1.0, 1.0);
        let r = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn infeasible_lp() {
        let mut m = AlgebraicModel::new("inf", ObjSense::Minimize);
        let x = m.add_var(Role::Flow, 0, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint(ConRole::Balance, 0, vec![(x, 1.0)], Sense::Ge, 1.0);
        m.add_constraint(ConRole::Balance, 1, vec![(x, 1.0)], Sense::Le, 0.0);
        let r = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_lp() {
        let mut m = AlgebraicModel::new("unb", ObjSense::Maximize);
        let x = m.add_var(Role::Flow, 0, VarKind::Continuous, 0.0, f64::INFINITY);
        m.set_objective(vec![(x, 1.0)], 0.0);
        let r = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn basic_duals() {
        // min x + 2y, x + y >= 1: dual of the row is 1
        let mut m = AlgebraicModel::new("d", ObjSense::Minimize);
        let x = m.add_var(Role::Flow, 0, VarKind::Continuous, 0.0, f64::INFINITY);
        let y = m.add_var(Role::Flow, 1, VarKind::Continuous, 0.0, f64::INFINITY);
        m.add_constraint(ConRole::Balance, 0, vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0);
        m.set_objective(vec![(x, 1.0), (y, 2.0)], 0.5);
        let r = HighsBackend.solve(&m, &SolveOptions::basic()).unwrap();
        assert!((r.objective - 1.5).abs() < 1e-9);
        let d = r.duals.unwrap();
        assert!((d.rows[0].abs() - 1.0).abs() < 1e-9);
        assert!((d.columns[1].abs() - 1.0).abs() < 1e-9);
        assert!(HighsBackend.solve(&m, &SolveOptions::default()).unwrap().duals.is_none());
    }

    #[test]
    fn mip_and_determinism() {
        let m = knapsack(25);
        let a = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        let b = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert!(a.gap <= 1e-4);
        assert_eq!(a.objective, b.objective);
        assert!(!a.incumbents.is_empty());
        assert!(m.max_violation(&a.values) < 1e-6);
    }

    #[test]
    fn target_cutoff() {
        let m = knapsack(40);
        let full = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        let target = full.objective * 0.5;
        let opts = SolveOptions { target_objective: Some(target), ..Default::default() };
        let r = HighsBackend.solve(&m, &opts).unwrap();
        assert!(r.objective >= target - 1e-6);
        if r.status == SolveStatus::FeasibleTargetReached {
            assert!(r.time_to_reach(target, 1e-6).is_some());
        } else {
            assert_eq!(r.status, SolveStatus::Optimal);
        }
    }

    #[test]
    fn warm_start_does_not_hurt() {
        let m = knapsack(30);
        let cold = HighsBackend.solve(&m, &SolveOptions::default()).unwrap();
        let mut opts = SolveOptions::default();
        for (i, &x) in cold.values.iter().enumerate() {
            opts.warm_start.insert(crate::model::VarId(i), x.round());
        }
        let warm = HighsBackend.solve(&m, &opts).unwrap();
        assert!(warm.objective >= cold.objective - 1e-9);
    }
}
