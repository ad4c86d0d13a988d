//! Batch experiment runner for the mixture filter library: simulate
//! fixtures, run the exact filter, evaluate likelihoods and validate against
//! the grid and particle oracles.

pub mod commands;
pub mod config;
pub mod io;

/// Command-level errors, mapped onto process exit codes by the binary:
/// 2 config, 3 numeric, 4 I/O.
#[derive(Debug)]
pub enum CliError {
    /// Every violated configuration constraint.
    Config(Vec<String>),
    /// A numeric failure from the filter or an oracle (impossible
    /// observation, degeneracy, grid leakage).
    Numeric(mixfilter::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Classify a library error: true numeric failures keep exit code 3,
    /// parameter problems surface as config errors.
    pub fn numeric(err: mixfilter::Error) -> Self {
        use mixfilter::Error::*;
        match err {
            ImpossibleObservation { .. } | DegenerateWeights | ParticleDegeneracy { .. }
            | GridWindowLeak { .. } | Domain(_) | SingularGain(_) => CliError::Numeric(err),
            InvalidParameter(_) | Unsupported(_) | FamilyMismatch { .. } => {
                CliError::Config(vec![err.to_string()])
            }
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(problems) => {
                writeln!(f, "configuration error ({} problem(s)):", problems.len())?;
                for p in problems {
                    writeln!(f, "  - {p}")?;
                }
                Ok(())
            }
            CliError::Numeric(e) => write!(f, "numeric error: {e}"),
            CliError::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
