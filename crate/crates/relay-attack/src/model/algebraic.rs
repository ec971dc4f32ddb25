use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

/// What a variable stands for. Together with a component index this is the
/// registry key used to read solutions back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Delta,
    GenUp,
    LineUp,
    BusUp,
    Flow,
    Dispatch,
    Shed,
    Angle,
    LambdaPlus,
    LambdaMinus,
    Mu,
    Gamma,
    Alpha,
    Beta,
    XiPlus,
    XiMinus,
    KappaPlus,
    KappaMinus,
    LambdaPlusBar,
    LambdaMinusBar,
    GammaBar,
    AlphaBar,
    XiPlusBar,
    XiMinusBar,
    Constant,
}

impl Role {
    pub fn tag(self) -> &'static str {
        use Role::*;
        match self {
            Delta => "delta",
            GenUp => "u",
            LineUp => "v",
            BusUp => "w",
            Flow => "f",
            Dispatch => "p",
            Shed => "l",
            Angle => "theta",
            LambdaPlus => "lamp",
            LambdaMinus => "lamm",
            Mu => "mu",
            Gamma => "gamma",
            Alpha => "alpha",
            Beta => "beta",
            XiPlus => "xip",
            XiMinus => "xim",
            KappaPlus => "kapp",
            KappaMinus => "kapm",
            LambdaPlusBar => "lampbar",
            LambdaMinusBar => "lammbar",
            GammaBar => "gammabar",
            AlphaBar => "alphabar",
            XiPlusBar => "xipbar",
            XiMinusBar => "ximbar",
            Constant => "const",
        }
    }

    /// Roles that are dual variables of a defender LP.
    pub fn is_dual(self) -> bool {
        use Role::*;
        matches!(
            self,
            LambdaPlus | LambdaMinus | Mu | Gamma | Alpha | Beta | XiPlus | XiMinus | KappaPlus | KappaMinus
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarKey {
    pub role: Role,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConRole {
    Budget,
    LineNeedsRelay,
    GenNeedsRelay,
    BusNeedsRelay,
    LineRelayOff,
    GenRelayOff,
    BusRelayOff,
    OhmUpper,
    OhmLower,
    Balance,
    DualFlow,
    DualDispatch,
    DualShed,
    DualAngle,
    LinLambdaPlus,
    LinLambdaMinus,
    LinGamma,
    LinAlpha,
    LinXiPlus,
    LinXiMinus,
}

impl ConRole {
    pub fn tag(self) -> &'static str {
        use ConRole::*;
        match self {
            Budget => "budget",
            LineNeedsRelay => "line_attack",
            GenNeedsRelay => "gen_attack",
            BusNeedsRelay => "bus_attack",
            LineRelayOff => "line_relay",
            GenRelayOff => "gen_relay",
            BusRelayOff => "bus_relay",
            OhmUpper => "ohm_up",
            OhmLower => "ohm_lo",
            Balance => "balance",
            DualFlow => "dual_flow",
            DualDispatch => "dual_dispatch",
            DualShed => "dual_shed",
            DualAngle => "dual_angle",
            LinLambdaPlus => "lin_lamp",
            LinLambdaMinus => "lin_lamm",
            LinGamma => "lin_gamma",
            LinAlpha => "lin_alpha",
            LinXiPlus => "lin_xip",
            LinXiMinus => "lin_xim",
        }
    }
}

/// Constraint key: role, component index, and a sub-index for families
/// that have several rows per component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConKey {
    pub role: ConRole,
    pub index: usize,
    pub sub: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub key: VarKey,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub key: ConKey,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// binary = active ⇒ Σ terms (sense) rhs.
#[derive(Debug, Clone, PartialEq)]
pub struct Indicator {
    pub name: String,
    pub key: ConKey,
    pub binary: VarId,
    pub active: bool,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("{what} references undeclared variable {var}")]
    UnknownVar { what: String, var: usize },
    #[error("indicator {0} is driven by a non-binary variable")]
    IndicatorNotBinary(String),
    #[error("binary variable {0} has bounds other than [0, 1]")]
    BinaryBounds(String),
    #[error("variable {name} has empty or invalid bounds [{lb}, {ub}]")]
    Bounds { name: String, lb: f64, ub: f64 },
    #[error("attack has {got} {what} entries, network has {expected}")]
    AttackShape { what: &'static str, expected: usize, got: usize },
    #[error("{what} {index} is off but none of its controlling relays is attacked")]
    InconsistentAttack { what: &'static str, index: usize },
    #[error("{what} {index} is on although relay {relay} controlling it is attacked")]
    AttackedButOn { what: &'static str, index: usize, relay: usize },
    #[error("relay map does not match the network")]
    RelayShape,
    #[error("budget {count} exceeds the number of relays {relays}")]
    Budget { count: usize, relays: usize },
    #[error("M must be at least 1, got {0}")]
    BigM(f64),
}

/// A solver-independent linear model with optional indicator constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicModel {
    pub name: String,
    pub sense: ObjSense,
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    indicators: Vec<Indicator>,
    objective: Vec<(VarId, f64)>,
    obj_constant: f64,
    var_index: BTreeMap<VarKey, VarId>,
    con_index: BTreeMap<ConKey, usize>,
}

impl AlgebraicModel {
    pub fn new(name: &str, sense: ObjSense) -> Self {
        AlgebraicModel {
            name: name.to_string(),
            sense,
            vars: Vec::new(),
            constraints: Vec::new(),
            indicators: Vec::new(),
            objective: Vec::new(),
            obj_constant: 0.0,
            var_index: BTreeMap::new(),
            con_index: BTreeMap::new(),
        }
    }

    /// Declare a variable. Binary variables always get bounds [0, 1].
    ///
    /// Panics when the key is already registered.
    pub fn add_var(&mut self, role: Role, index: usize, kind: VarKind, lb: f64, ub: f64) -> VarId {
        let key = VarKey { role, index };
        let id = VarId(self.vars.len());
        assert!(self.var_index.insert(key, id).is_none(), "duplicate variable {key:?}");
        let (lb, ub) = if kind == VarKind::Binary { (0.0, 1.0) } else { (lb, ub) };
        self.vars.push(Variable { name: format!("{}_{}", role.tag(), index), key, kind, lb, ub });
        id
    }

    pub fn add_constraint(&mut self, role: ConRole, index: usize, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> usize {
        self.add_constraint_sub(role, index, 0, terms, sense, rhs)
    }

    pub fn add_constraint_sub(
        &mut self,
        role: ConRole,
        index: usize,
        sub: usize,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let key = ConKey { role, index, sub };
        let row = self.constraints.len();
        assert!(self.con_index.insert(key, row).is_none(), "duplicate constraint {key:?}");
        let name = if sub == 0 {
            format!("{}_{}", role.tag(), index)
        } else {
            format!("{}_{}_{}", role.tag(), index, sub)
        };
        self.constraints.push(Constraint { name, key, terms, sense, rhs });
        row
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_indicator(
        &mut self,
        role: ConRole,
        index: usize,
        sub: usize,
        binary: VarId,
        active: bool,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let key = ConKey { role, index, sub };
        let name = format!("ind_{}_{}_{}", role.tag(), index, sub);
        self.indicators.push(Indicator { name, key, binary, active, terms, sense, rhs });
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, f64)>, constant: f64) {
        self.objective = terms;
        self.obj_constant = constant;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }
    pub fn indicators(&self) -> &[Indicator] {
        &self.indicators
    }
    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }
    pub fn obj_constant(&self) -> f64 {
        self.obj_constant
    }
    pub fn var(&self, role: Role, index: usize) -> Option<VarId> {
        self.var_index.get(&VarKey { role, index }).copied()
    }
    pub fn row(&self, key: ConKey) -> Option<usize> {
        self.con_index.get(&key).copied()
    }
    pub fn var_keys(&self) -> impl Iterator<Item = (&VarKey, &VarId)> {
        self.var_index.iter()
    }
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }
    pub fn count_role(&self, role: Role) -> usize {
        self.vars.iter().filter(|v| v.key.role == role).count()
    }
    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }
    pub fn is_mip(&self) -> bool {
        self.n_binaries() > 0 || !self.indicators.is_empty()
    }

    /// Structural checks: references, binary bounds, bound ordering.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.vars.len();
        let check = |what: &str, terms: &[(VarId, f64)]| {
            terms
                .iter()
                .find(|(v, _)| v.0 >= n)
                .map_or(Ok(()), |(v, _)| Err(ModelError::UnknownVar { what: what.to_string(), var: v.0 }))
        };
        for v in &self.vars {
            if v.kind == VarKind::Binary && (v.lb != 0.0 || v.ub != 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub || v.lb == f64::INFINITY || v.ub == f64::NEG_INFINITY {
                return Err(ModelError::Bounds { name: v.name.clone(), lb: v.lb, ub: v.ub });
            }
        }
        check("objective", &self.objective)?;
        for c in &self.constraints {
            check(&c.name, &c.terms)?;
        }
        for ind in &self.indicators {
            check(&ind.name, &ind.terms)?;
            if ind.binary.0 >= n {
                return Err(ModelError::UnknownVar { what: ind.name.clone(), var: ind.binary.0 });
            }
            if self.vars[ind.binary.0].kind != VarKind::Binary {
                return Err(ModelError::IndicatorNotBinary(ind.name.clone()));
            }
        }
        Ok(())
    }

    /// Evaluate the objective at a point.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.objective.iter().map(|(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Largest violation of bounds, rows and indicators at a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lb - xv).max(xv - v.ub);
        }
        let row_viol = |terms: &[(VarId, f64)], sense: Sense, rhs: f64| {
            let lhs: f64 = terms.iter().map(|(v, c)| c * x[v.0]).sum();
            match sense {
                Sense::Le => lhs - rhs,
                Sense::Ge => rhs - lhs,
                Sense::Eq => (lhs - rhs).abs(),
            }
        };
        for c in &self.constraints {
            worst = worst.max(row_viol(&c.terms, c.sense, c.rhs));
        }
        for ind in &self.indicators {
            let on = x[ind.binary.0] > 0.5;
            if on == ind.active {
                worst = worst.max(row_viol(&ind.terms, ind.sense, ind.rhs));
            }
        }
        worst
    }

    /// CPLEX LP text. Indicator rows are written in `<=` form only.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\\ {}", self.name);
        s.push_str(match self.sense {
            ObjSense::Minimize => "Minimize\n",
            ObjSense::Maximize => "Maximize\n",
        });
        let mut obj = self.objective.clone();
        let const_name = "obj_constant";
        s.push_str(" obj:");
        if self.obj_constant != 0.0 {
            obj.push((VarId(usize::MAX), self.obj_constant));
        }
        if obj.is_empty() && !self.vars.is_empty() {
            obj.push((VarId(0), 0.0));
        }
        let name_of = |v: VarId| if v.0 == usize::MAX { const_name } else { self.vars[v.0].name.as_str() };
        let linear = |s: &mut String, terms: &[(VarId, f64)], scale: f64| {
            if terms.is_empty() {
                let _ = write!(s, " 0 {}", name_of(VarId(0)));
            }
            for (v, c) in terms {
                let c = c * scale;
                let sign = if c < 0.0 { '-' } else { '+' };
                let _ = write!(s, " {} {} {}", sign, fmt_num(c.abs()), name_of(*v));
            }
        };
        linear(&mut s, &obj, 1.0);
        s.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(s, " {}:", c.name);
            linear(&mut s, &c.terms, 1.0);
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {} {}", op, fmt_num(c.rhs));
        }
        for ind in &self.indicators {
            let head = format!("{} = {}", self.vars[ind.binary.0].name, if ind.active { 1 } else { 0 });
            let mut parts: Vec<(f64, &str)> = Vec::new();
            match ind.sense {
                Sense::Le => parts.push((1.0, "")),
                Sense::Ge => parts.push((-1.0, "")),
                Sense::Eq => {
                    parts.push((1.0, "_le"));
                    parts.push((-1.0, "_ge"));
                }
            }
            for (scale, suffix) in parts {
                let _ = write!(s, " {}{}: {} ->", ind.name, suffix, head);
                linear(&mut s, &ind.terms, scale);
                let _ = writeln!(s, " <= {}", fmt_num(ind.rhs * scale));
            }
        }
        s.push_str("Bounds\n");
        for v in &self.vars {
            if v.kind == VarKind::Binary {
                // some readers reject binaries that only appear in the Binaries section
                let _ = writeln!(s, " 0 <= {} <= 1", v.name);
                continue;
            }
            match (v.lb.is_finite(), v.ub.is_finite()) {
                (false, false) => {
                    let _ = writeln!(s, " {} free", v.name);
                }
                (true, true) if v.lb == v.ub => {
                    let _ = writeln!(s, " {} = {}", v.name, fmt_num(v.lb));
                }
                (true, true) => {
                    let _ = writeln!(s, " {} <= {} <= {}", fmt_num(v.lb), v.name, fmt_num(v.ub));
                }
                (true, false) => {
                    let _ = writeln!(s, " {} >= {}", v.name, fmt_num(v.lb));
                }
                (false, true) => {
                    let _ = writeln!(s, " -inf <= {} <= {}", v.name, fmt_num(v.ub));
                }
            }
        }
        if self.obj_constant != 0.0 {
            let _ = writeln!(s, " {} = 1", const_name);
        }
        let bins: Vec<&str> = self.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
        if !bins.is_empty() {
            s.push_str("Binaries\n");
            for chunk in bins.chunks(10) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        s.push_str("End\n");
        s
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> AlgebraicModel {
        let mut m = AlgebraicModel::new("toy", ObjSense::Maximize);
        let x = m.add_var(Role::Flow, 0, VarKind::Continuous, 0.0, 4.0);
        let b = m.add_var(Role::Delta, 0, VarKind::Binary, -3.0, 9.0);
        let y = m.add_var(Role::Mu, 0, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint(ConRole::Budget, 0, vec![(x, 1.0), (b, -2.5)], Sense::Le, 1.0);
        m.add_constraint(ConRole::Balance, 0, vec![(y, 1.0), (x, -1.0)], Sense::Eq, 0.0);
        m.add_indicator(ConRole::LinAlpha, 0, 1, b, false, vec![(x, 1.0)], Sense::Eq, 0.0);
        m.set_objective(vec![(x, 1.0), (b, 0.5)], 2.0);
        m
    }

    #[test]
    fn binary_bounds_forced_and_valid() {
        let m = toy();
        assert_eq!((m.vars()[1].lb, m.vars()[1].ub), (0.0, 1.0));
        assert!(m.validate().is_ok());
        assert_eq!(m.var(Role::Mu, 0), Some(VarId(2)));
        assert!(m.is_mip());
    }

    #[test]
    fn rejects_bad_references() {
        let mut m = toy();
        m.add_constraint(ConRole::Balance, 1, vec![(VarId(9), 1.0)], Sense::Le, 0.0);
        assert!(matches!(m.validate(), Err(ModelError::UnknownVar { var: 9, .. })));
        let mut m = toy();
        let x = m.var(Role::Flow, 0).unwrap();
        m.add_indicator(ConRole::LinAlpha, 1, 0, x, true, vec![], Sense::Le, 0.0);
        assert!(matches!(m.validate(), Err(ModelError::IndicatorNotBinary(_))));
    }

    #[test]
    #[should_panic(expected = "duplicate variable")]
    fn duplicate_key_panics() {
        let mut m = toy();
        m.add_var(Role::Flow, 0, VarKind::Continuous, 0.0, 1.0);
    }

    #[test]
    fn lp_text() {
        let lp = toy().to_lp_string();
        assert!(lp.starts_with("\\ toy\nMaximize\n obj: + 1.0 f_0 + 0.5 delta_0 + 2.0 obj_constant\n"));
        assert!(lp.contains(" budget_0: + 1.0 f_0 - 2.5 delta_0 <= 1.0\n"));
        assert!(lp.contains(" ind_lin_alpha_0_1_le: delta_0 = 0 -> + 1.0 f_0 <= 0.0\n"));
        assert!(lp.contains(" ind_lin_alpha_0_1_ge: delta_0 = 0 -> - 1.0 f_0 <= -0.0\n"));
        assert!(lp.contains(" mu_0 free\n"));
        assert!(lp.contains(" 0.0 <= f_0 <= 4.0\n"));
        assert!(lp.contains("Binaries\n delta_0\nEnd\n"));
    }

    #[test]
    fn violation_and_objective() {
        let m = toy();
        let x = [1.0, 1.0, 1.0];
        assert_eq!(m.objective_at(&x), 3.5);
        assert_eq!(m.max_violation(&x), 0.0);
        // indicator active at b = 0 forces f = 0
        assert_eq!(m.max_violation(&[1.0, 0.0, 1.0]), 1.0);
    }
}
