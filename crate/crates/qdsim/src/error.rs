use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("geometry: {0}")]
    Geometry(String),

    #[error("config: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{stage}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Process exit code for the CLI: 2 config, 3 solver, 4 geometry, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::NonConvergence { .. } => 3,
            SimError::Geometry(_) | SimError::GridMismatch(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
