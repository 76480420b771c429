use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The instance needs `required` enumeration steps but only `budget` are allowed.
    #[error("budget exceeded: instance needs {required} states, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("cannot sample {n} distinct cells from a {m}x{m} grid")]
    TooManySamples { n: usize, m: usize },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A bound that diverges for the given inputs (zero distortion in the continuous model).
    #[error("bound is infinite: {0}")]
    InfiniteBound(String),

    #[error("no n in the grid reaches the target error rate for {0}")]
    NoCrossing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// `base^exp` in u128, saturating at `u128::MAX`.
pub(crate) fn saturating_pow(base: u64, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
        if acc == u128::MAX || acc == 0 {
            break;
        }
    }
    acc
}

pub(crate) fn check_budget(required: u128, budget: u128) -> Result<()> {
    if required > budget {
        Err(Error::BudgetExceeded { required, budget })
    } else {
        Ok(())
    }
}
