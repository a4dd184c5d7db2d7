use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("precondition `{check}` failed{}", fmt_witness(.witness))]
    Precondition { check: String, witness: Option<String> },
    #[error("CRITICAL: {what}{}", fmt_witness(.witness))]
    Critical { what: String, witness: Option<String> },
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("unknown rule `{0}`")]
    Registry(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },
    #[error("bad spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_witness(w: &Option<String>) -> String {
    match w {
        Some(w) => format!(" (witness: {w})"),
        None => String::new(),
    }
}

impl Error {
    pub fn precondition(check: impl Into<String>, witness: Option<String>) -> Self {
        Error::Precondition { check: check.into(), witness }
    }

    pub fn critical(what: impl Into<String>, witness: Option<String>) -> Self {
        Error::Critical { what: what.into(), witness }
    }

    pub fn is_critical(&self) -> bool {
        matches!(self, Error::Critical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
