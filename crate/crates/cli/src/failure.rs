use gridforge::error::{AnalysisError, ScenarioError, SynthesisError};
use gridforge::microgrid::SimError;
use std::fmt;
use std::path::{Path, PathBuf};

/// Command failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Infeasible(String),
    Singular(String),
    Abort { message: String, dump: Option<PathBuf> },
    Verify(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Singular(_) => 3,
            Failure::Abort { .. } => 4,
            Failure::Verify(_) => 5,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Failure::Parse(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Parse(m) | Failure::Infeasible(m) | Failure::Singular(m) | Failure::Verify(m) => f.write_str(m),
            Failure::Abort { message, dump: Some(p) } => write!(f, "{message}; last rows dumped to {}", p.display()),
            Failure::Abort { message, dump: None } => f.write_str(message),
        }
    }
}

impl From<SynthesisError> for Failure {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Infeasible(_) => Failure::Infeasible(e.to_string()),
            SynthesisError::Numerics(_) => Failure::Singular(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Singular(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Synthesis(s) => s.into(),
            other => Failure::Parse(other.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Abort {
            message: e.to_string(),
            dump: None,
        }
    }
}
