use std::fmt;

use lsmm::Error;

/// Failure of a command, carrying its exit-code class.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input that fails validation; exit code 2.
    Config(String),
    /// A computation failed or a checked invariant does not hold; exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Dimension(_)
            | Error::Invalid(_)
            | Error::NonFinite(_)
            | Error::NotConjugateClosed
            | Error::DuplicatePoint(_)
            | Error::TargetsNotConjugateClosed
            | Error::NotObservable
            | Error::NotAdmissible(_)
            | Error::NotSkewSymmetric
            | Error::Unstable { .. }
            | Error::DegreeOverflow { .. }
            | Error::OrderExceedsDegree { .. }
            | Error::PairSplit { .. }
            | Error::EmptySampleSet => CliError::Config(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
