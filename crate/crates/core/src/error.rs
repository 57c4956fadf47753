use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// No power allocation on the simplex meets every user's minimum rate
    /// under the given assignment.
    #[error("QoS targets cannot be met under the given assignment (INFEASIBLE_QOS)")]
    InfeasibleQos,

    #[error("interior-point solver stalled after {iterations} Newton steps (gap {gap:.3e})")]
    SolverStall { iterations: usize, gap: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
