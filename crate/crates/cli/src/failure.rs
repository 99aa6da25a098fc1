use std::path::Path;

use bozk_core::Error;
use serde::Serialize;

/// A run failure with its exit code and machine-readable kind.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub error: &'static str,
    pub exit_code: u8,
    pub message: String,
    #[serde(skip)]
    pub code: u8,
}

impl Failure {
    fn new(code: u8, error: &'static str, message: String) -> Self {
        Self {
            error,
            exit_code: code,
            message,
            code,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(2, "invalid-config", message.into())
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(1, "io", message.into())
    }

    pub fn core(e: &Error) -> Self {
        let (code, kind) = classify_error(e);
        Self::new(code, kind, e.to_string())
    }

    /// Prints the error JSON to stderr and, when possible, to `error.json`.
    pub fn report(&self, out: Option<&Path>) {
        let text = serde_json::to_string(self).expect("failure serializes");
        eprintln!("{text}");
        if let Some(dir) = out {
            if std::fs::create_dir_all(dir).is_ok() {
                let _ = std::fs::write(dir.join("error.json"), format!("{text}\n"));
            }
        }
    }
}

fn classify_error(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Regime(_) => (3, "regime"),
        Error::NotConverged { .. } => (4, "not-converged"),
        Error::Sweep { source, .. } => classify_error(source),
        Error::InvalidParams(_) | Error::InvalidGrid(_) => (2, "invalid-config"),
        Error::BlowUp { .. } => (1, "blow-up"),
        Error::BadMagic(_) | Error::Header(_) | Error::PayloadSize { .. } => (1, "field-file"),
        Error::Io(_) => (1, "io"),
        _ => (1, "runtime"),
    }
}
