use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value iteration did not converge after {sweeps} sweeps (last residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("feature construction failed after {attempts} attempts (best ‖I − ΦΦᵀ‖∞ = {best:.4}, requested {epsilon})")]
    FeatureConstruction {
        attempts: usize,
        best: f64,
        epsilon: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),

    #[error("unknown scheme id `{0}`")]
    UnknownScheme(String),

    #[error("oracle quantities are only available in exact/oracle mode: {0}")]
    OracleUnavailable(String),

    #[error("replay buffer is empty at the first sample request")]
    EmptyBuffer,

    #[error("projection failed at iteration {iteration}: {source}")]
    Projection {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
