use std::fmt;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration:\n{0}")]
    Config(ConfigErrors),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(QuadratureDiagnostics),

    #[error("gamma fit did not converge after {iterations} Newton steps (last kappa = {kappa})")]
    FitDivergence { iterations: usize, kappa: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every violated invariant of a configuration, not just the first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigErrors(pub Vec<String>);

impl ConfigErrors {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, msg) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  - {msg}")?;
        }
        Ok(())
    }
}

/// State of an adaptive integration that failed to meet its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDiagnostics {
    pub stage: &'static str,
    pub value: f64,
    pub error_estimate: f64,
    pub tolerance: f64,
    pub intervals: usize,
    pub upper_limit: f64,
}

impl fmt::Display for QuadratureDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: value {:.6e}, error estimate {:.3e} > tolerance {:.3e} ({} intervals, upper limit {:.3e})",
            self.stage, self.value, self.error_estimate, self.tolerance, self.intervals, self.upper_limit
        )
    }
}
