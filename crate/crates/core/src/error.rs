use thiserror::Error;

use crate::simplex::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function (negative delay or time).
    #[error("{what} must be non-negative, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("allocation is {found_rows}x{found_cols}, scenario expects {rows}x{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    /// A model invariant does not hold. `invariant` is a stable machine-readable name.
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    /// Both sides of the regime inequality are equal; neither regime is defined.
    #[error("regime tie: unit side {units_side} equals reimbursement side {reimbursement_side}")]
    RegimeTie {
        units_side: f64,
        reimbursement_side: f64,
    },

    /// The scenario is not of the two-installment, units-plus-reimbursement shape.
    #[error("scenario shape not supported: {0}")]
    Shape(String),

    #[error(transparent)]
    Lp(#[from] LpError),
}

impl Error {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }

    pub fn invariant_name(&self) -> Option<&'static str> {
        match self {
            Error::Invariant { invariant, .. } => Some(invariant),
            _ => None,
        }
    }
}
