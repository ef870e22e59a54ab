use std::fmt;
use std::process::ExitCode;

/// Command outcome other than success, with its stable exit code.
#[derive(Debug)]
pub enum Failure {
    /// A verification ran and did not pass (exit 1).
    Check(String),
    /// Bad flags, configuration, data or checkpoint (exit 2).
    Usage(String),
    /// Non-finite values during training or inference (exit 3).
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<andt::Error> for Failure {
    fn from(e: andt::Error) -> Self {
        match e {
            andt::Error::Numeric(_) | andt::Error::DegenerateBatch(_) => Failure::Numeric(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;
