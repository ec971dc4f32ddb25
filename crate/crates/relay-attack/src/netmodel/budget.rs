use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BudgetError {
    #[error("budget percentage {0} is outside [0, 100]")]
    Percentage(f64),
    #[error("budget {count} exceeds the number of relays {relays}")]
    TooLarge { count: usize, relays: usize },
}

/// Attacker cardinality budget U, optionally tagged with the percentage it
/// was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub percentage: Option<f64>,
    pub count: usize,
}

impl Budget {
    pub fn count(count: usize, n_relays: usize) -> Result<Self, BudgetError> {
        if count > n_relays {
            return Err(BudgetError::TooLarge { count, relays: n_relays });
        }
        Ok(Budget { percentage: None, count })
    }
}

/// U = round(pct · n / 100) with ties going to the even integer.
///
/// The rounding rule is inferred, not documented by the source tables: both
/// half-integer cases there (25% of 118 and 25% of 1354) only agree with
/// ties-to-even.
pub fn budget_from_percentage(pct: f64, n_relays: usize) -> Result<Budget, BudgetError> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(BudgetError::Percentage(pct));
    }
    let count = (pct * n_relays as f64 / 100.0).round_ties_even() as usize;
    Ok(Budget { percentage: Some(pct), count: count.min(n_relays) })
}
