//! Error and validation-violation types shared across the engine.

use thiserror::Error;

/// A single violated invariant, identified by the field that carries it.
///
/// Violations are data, not failures: validation routines return the full
/// list so a caller (or a CLI error message) can name every offending field
/// at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Name of the offending field, e.g. `"rho"` or `"grid.n_s"`.
    pub field: &'static str,
    /// Human-readable description of the violated bound.
    pub message: String,
}

impl Violation {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Engine-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// One or more typed invariants do not hold.
    #[error("invalid parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    /// An argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two containers that must share a shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A query point lies outside the covered region.
    #[error("out of range: {0}")]
    Range(String),

    /// A quantity whose reciprocal is required vanished.
    #[error("singular: {0}")]
    Singular(String),

    /// The solver produced NaN or infinity; `step` is the backward time step
    /// at which it first appeared.
    #[error("non-finite values at time step {step}: {context}")]
    NonFinite { step: usize, context: String },
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(Violation::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_display_names_field() {
        let v = Violation::new("rho", "must lie in [-1, 1] (got 1.5)");
        assert_eq!(v.to_string(), "rho: must lie in [-1, 1] (got 1.5)");
    }

    #[test]
    fn invalid_params_lists_all_violations() {
        let err = Error::InvalidParams(vec![
            Violation::new("rho", "out of bounds"),
            Violation::new("xi", "negative"),
        ]);
        let msg = err.to_string();
        assert!(msg.contains("rho"));
        assert!(msg.contains("xi"));
    }
}
