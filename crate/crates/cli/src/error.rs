use capstab_core::CapstabError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numerical(#[from] CapstabError),
    #[error("all {count} points failed, first: {first}")]
    AllFailed { count: usize, first: String },
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    kind: &'a str,
    exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::SchemaMismatch(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) | CliError::AllFailed { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::SchemaMismatch(_) => "schema_mismatch",
            CliError::Io(_) => "io",
            CliError::Numerical(e) => capstab_core::sweep::error_kind(e),
            CliError::AllFailed { .. } => "all_failed",
        }
    }

    pub fn to_json(&self) -> String {
        let msg = self.to_string();
        serde_json::to_string(&ErrorJson {
            error: &msg,
            kind: self.kind(),
            exit_code: self.exit_code(),
        })
        .expect("error serializes")
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
