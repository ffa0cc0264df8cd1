use krein::KreinError;
use serde_json::json;
use thiserror::Error;

use crate::config::Diagnostic;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration")]
    Invalid(Vec<Diagnostic>),

    #[error("config field {field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Library(#[from] KreinError),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 2 for anything wrong with the input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(
                KreinError::NumericRange { .. }
                | KreinError::NumericFailure { .. }
                | KreinError::Consistency(_),
            ) => 3,
            _ => 2,
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Invalid(diags) => {
                let first = diags
                    .iter()
                    .find(|d| d.severity == crate::config::Severity::Error)
                    .map(|d| d.field.clone());
                json!({"error": "validation", "field": first, "diagnostics": diags})
            }
            CliError::Config { field, message } => {
                json!({"error": "validation", "field": field, "message": message})
            }
            CliError::Library(e) => {
                let kind = if self.exit_code() == 3 { "numeric" } else { "validation" };
                json!({"error": kind, "field": null, "message": e.to_string()})
            }
            CliError::Io { path, message } => {
                json!({"error": "io", "field": "out", "path": path, "message": message})
            }
        }
    }
}
