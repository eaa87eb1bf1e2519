use std::fmt;

use mimtwin::Error;

/// Process outcome other than success, one variant per exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad config, flags or input files.
    Input(String),
    Numerical(String),
    /// The series produced no report.
    NoReport(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::NoReport(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Numerical(m) | Failure::NoReport(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Input(_) | Error::Config { .. } | Error::Parse { .. } | Error::Io(_) => {
                Failure::Input(e.to_string())
            }
            Error::Numerical(_) | Error::Instability { .. } | Error::Inconsistent(_) => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}
