use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("too few samples for {what}: need at least {needed}, got {got}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (best iterate xi={xi}, sigma={sigma}, loglik={loglik})"
    )]
    NonConvergence {
        iterations: usize,
        xi: f64,
        sigma: f64,
        loglik: f64,
    },

    #[error("no radial cut-off satisfies |corr| < {critical} ({candidates} candidates scanned)")]
    NoRadialCutoff {
        critical: f64,
        candidates: usize,
        profile: Vec<crate::validation::R0Candidate>,
    },

    #[error("no threshold keeps the stability curves linear with R^2 > {r2_min}")]
    NoOptimumThreshold { r2_min: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Tags the error with a stage name unless it already carries one.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Pipeline stage the error originated in, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
