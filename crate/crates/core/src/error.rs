use thiserror::Error;

use crate::grid::GridSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid functions live on different grids: {left} vs {right}")]
    GridMismatch { left: GridSpec, right: GridSpec },

    #[error("invalid grid {n1}x{n2}: node counts must be at least 2")]
    InvalidGrid { n1: usize, n2: usize },

    #[error("expected {expected} values for the interior nodes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{name} = {value} is outside its admissible range {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("{0}")]
    Precondition(String),

    #[error("conjugate gradient stopped after {iterations} iterations with relative residual {residual:e}")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("rational term {index}: {source}")]
    Term {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("substep {substep}: {source}")]
    Substep {
        substep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time level {level}: {source}")]
    TimeLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("quadrature construction failed: {0}")]
    Quadrature(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn in_term(self, index: usize) -> Self {
        Error::Term {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_substep(self, substep: usize) -> Self {
        Error::Substep {
            substep,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::TimeLevel {
            level,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
