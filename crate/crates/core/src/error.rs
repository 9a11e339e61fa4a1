use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge on [{a}, {b}] after {subdivisions} subdivisions: estimate {estimate}, error {error_estimate:e}")]
    QuadratureNonConvergence {
        a: f64,
        b: f64,
        subdivisions: usize,
        estimate: f64,
        error_estimate: f64,
    },

    #[error("integration bounds must be finite, got [{a}, {b}]")]
    NonFiniteBounds { a: f64, b: f64 },

    #[error("no sign change in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("grid is not sorted at index {index}")]
    UnsortedGrid { index: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("standing assumptions failed: {0}")]
    AssumptionsFailed(String),

    #[error("menu invariant `{invariant}` violated between v1 = {v1_a} and v1 = {v1_b}")]
    MenuInvariant {
        invariant: &'static str,
        v1_a: f64,
        v1_b: f64,
    },

    #[error("mechanism is infeasible at v1 = {v1}, v2 = {v2}: q1 = {q1}, q2 = {q2}")]
    InfeasibleMechanism { v1: f64, v2: f64, q1: f64, q2: f64 },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
