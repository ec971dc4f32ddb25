use relay_attack::graph::GraphError;
use relay_attack::interdiction::InterdictionError;
use relay_attack::netmodel::{BudgetError, LoadError};
use relay_attack::oracle::OracleError;
use relay_attack::solver::SolverError;
use std::fmt;

pub const USAGE: u8 = 1;
pub const SOLVER: u8 = 2;
pub const PARSE: u8 = 3;
pub const CAP: u8 = 4;
pub const CHECK_FAILED: u8 = 5;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::new(PARSE, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure::new(SOLVER, e.to_string())
    }
}

impl From<BudgetError> for Failure {
    fn from(e: BudgetError) -> Self {
        Failure::new(USAGE, e.to_string())
    }
}

fn interdiction_code(e: &InterdictionError) -> u8 {
    match e {
        InterdictionError::Config(_) | InterdictionError::MissingBigM => USAGE,
        InterdictionError::Parse(_) | InterdictionError::Csv(_) | InterdictionError::Io { .. } => PARSE,
        _ => SOLVER,
    }
}

impl From<InterdictionError> for Failure {
    fn from(e: InterdictionError) -> Self {
        Failure::new(interdiction_code(&e), e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match &e {
            OracleError::CapExceeded { .. } | OracleError::Limits(_) => CAP,
            OracleError::Attack { source, .. } => interdiction_code(source),
            OracleError::MultipleGenerators(_) => USAGE,
            OracleError::NotBasic(_) => SOLVER,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let code = if matches!(e, GraphError::Solver(_)) { SOLVER } else { USAGE };
        Failure::new(code, e.to_string())
    }
}

pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::new(PARSE, format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use relay_attack::solver::SolveStatus;

    #[test]
    fn codes() {
        assert_eq!(Failure::from(InterdictionError::Config("x".into())).code, USAGE);
        assert_eq!(Failure::from(InterdictionError::Parse("x".into())).code, PARSE);
        let e = InterdictionError::NoSolution { what: "lp", status: SolveStatus::Error, message: None };
        assert_eq!(Failure::from(e).code, SOLVER);
        assert_eq!(Failure::from(OracleError::CapExceeded { needed: 9, cap: 1 }).code, CAP);
        let nested = OracleError::Attack { attack: vec![0], source: InterdictionError::Parse("y".into()) };
        assert_eq!(Failure::from(nested).code, PARSE);
        assert_eq!(Failure::from(GraphError::Singular).code, USAGE);
    }
}
