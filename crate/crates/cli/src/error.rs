use std::fmt;

/// Maps onto the process exit status.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical { check: String, detail: String },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical { .. } => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn numerical(check: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::Numerical {
            check: check.into(),
            detail: detail.into(),
        }
    }

    pub fn io(context: impl fmt::Display, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failure: {m}"),
            CliError::Numerical { check, detail } => write!(f, "numerical failure in check '{check}': {detail}"),
            CliError::Io(m) => write!(f, "I/O failure: {m}"),
        }
    }
}

impl From<baflow::Error> for CliError {
    fn from(e: baflow::Error) -> Self {
        use baflow::Error as E;
        match &e {
            E::NotFixedPoint { .. } => CliError::numerical("fixed-point certification", e.to_string()),
            E::PositivityLoss { .. } => CliError::numerical("positivity", e.to_string()),
            E::LyapunovViolation { .. } => CliError::numerical("free-energy monotonicity", e.to_string()),
            E::TooFewSamples { .. } | E::FitRejected(_) => CliError::numerical("decay-rate fit", e.to_string()),
            E::SelfTest(_) => CliError::numerical("spectral self-test", e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
