use std::fmt;

use serde_json::json;

/// Failure of a run: bad configuration (exit 2) or a failed computation
/// (exit 1).
#[derive(Debug)]
pub enum CliError {
    Config { message: String, path: Option<String> },
    Runtime(String),
}

impl CliError {
    pub fn config(message: impl Into<String>, path: Option<String>) -> Self {
        CliError::Config { message: message.into(), path }
    }

    /// Invalid value at a known key path.
    pub fn at(path: &str, message: impl fmt::Display) -> Self {
        CliError::Config { message: format!("{path}: {message}"), path: Some(path.to_string()) }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config { message, path } => json!({
                "error": { "kind": "config", "message": message, "path": path }
            }),
            CliError::Runtime(message) => json!({ "error": { "kind": "runtime", "message": message } }),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { message, .. } => write!(f, "config error: {message}"),
            CliError::Runtime(message) => write!(f, "runtime error: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pseudoiid::Error> for CliError {
    fn from(e: pseudoiid::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
