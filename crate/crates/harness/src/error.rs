use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("{}: field `{field}`: {message}", location(*line))]
    Config {
        /// 1-based line in the config file; 0 for the command line.
        line: usize,
        field: String,
        message: String,
    },
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn location(line: usize) -> String {
    if line == 0 {
        "command line".to_string()
    } else {
        format!("line {line}")
    }
}

impl LabError {
    pub fn config(line: usize, field: &str, message: impl Into<String>) -> Self {
        LabError::Config {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config { .. } => 1,
            LabError::Assertion(_) => 2,
            LabError::Runtime(_) | LabError::Io { .. } => 3,
        }
    }
}

impl From<discor_core::Error> for LabError {
    fn from(e: discor_core::Error) -> Self {
        LabError::Runtime(e.to_string())
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
