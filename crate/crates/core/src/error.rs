use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("malformed channel JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid channel field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("invalid Rayleigh profile: {0}")]
    Profile(String),
    #[error("no diagonally dominant channel after {attempts} draws")]
    RejectionCapExceeded { attempts: usize },
}

impl ChannelError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        ChannelError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("game configuration: {0}")]
    Config(String),
    #[error("allocation for user {user}: {reason}")]
    Allocation { user: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("leader problem: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("follower sub-game did not converge within {iterations} rounds")]
    FollowerDiverged { iterations: usize },
    #[error("exhaustive search needs about {required:.3e} evaluations, cap is {cap:.3e}")]
    EvaluationCap { required: f64, cap: f64 },
    #[error("dual bracket could not be established: total power {total} still above budget {budget} at mu = {mu}")]
    DualBracket { mu: f64, total: f64, budget: f64 },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("experiment spec: {0}")]
    Spec(String),
    #[error("empirical CDF needs at least one value")]
    EmptySample,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
