use thiserror::Error;

use crate::model::{TripId, VehicleId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid {field}: {message}")]
    Invariant { field: String, message: String },

    #[error("invalid metric: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("trip {trip} is not admissible for vehicle {vehicle}")]
    Inadmissible { trip: TripId, vehicle: VehicleId },

    #[error("{stops} stops exceed the exact routing limit of {limit}")]
    StopOverflow { stops: usize, limit: usize },

    #[error("catalog is not downward closed: trip {requests:?} missing for vehicle {vehicle}")]
    ClosureViolation {
        vehicle: VehicleId,
        requests: Vec<usize>,
    },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("search space of {size:.3e} combinations exceeds the limit of {limit:.0e}")]
    SearchSpaceOverflow { size: f64, limit: f64 },

    #[error("time limit reached without a feasible solution")]
    TimeLimit,

    #[error("column generation did not converge within {0} iterations")]
    IterationCap(usize),
}

impl Error {
    pub fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
