use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Config,
}

/// Pipeline stage attached to errors raised while estimating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pilot,
    Refine,
    Window,
    Final,
    GammaHat,
    Variance,
    Gate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Pilot => "pilot",
            Stage::Refine => "refine",
            Stage::Window => "randomized window",
            Stage::Final => "final",
            Stage::GammaHat => "gamma estimation",
            Stage::Variance => "clt variance",
            Stage::Gate => "semimartingale gate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid price series: {0}")]
    InvalidSeries(String),

    #[error("series too short for (ell={ell}, k={k}): need {needed} increments, have {available}")]
    SeriesTooShort {
        ell: usize,
        k: usize,
        needed: usize,
        available: usize,
    },

    #[error("window out of range: {0}")]
    Range(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("quadrature did not converge: achieved error estimate {achieved:e} > {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("circulant embedding has negative eigenvalue {value:e} at index {index}")]
    Embedding { index: usize, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidSeries(_) | Error::SeriesTooShort { .. } | Error::Range(_) | Error::DegenerateData(_) => {
                ErrorKind::Data
            }
            Error::Domain(_) | Error::Numeric(_) | Error::Quadrature { .. } | Error::Embedding { .. } => {
                ErrorKind::Numeric
            }
            Error::Config(_) => ErrorKind::Config,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    /// The innermost stage label, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, source } => source.stage().or(Some(*stage)),
            _ => None,
        }
    }

    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
