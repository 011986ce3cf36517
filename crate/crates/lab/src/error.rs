use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("table: {0}")]
    Table(String),
    #[error(transparent)]
    Solver(#[from] nehari_core::Error),
}

impl LabError {
    /// 2 for anything the user can fix in the config or paths, 3 for solver
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Solver(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
