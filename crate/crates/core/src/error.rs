use thiserror::Error;

use crate::model::{ComponentId, Rational, ValidationReport};

/// Malformed input: ids that do not resolve, bad weights, or an invalid model where a valid one is required.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate component id {0}")]
    DuplicateComponent(ComponentId),
    #[error("unknown component {id} referenced by {context}")]
    UnknownComponent { id: ComponentId, context: String },
    #[error("weight {weight} of marking {index} is outside (0,1]")]
    WeightOutOfRange { index: u32, weight: Rational },
    #[error("expected {expected} weights, found {found}")]
    WeightLength { expected: usize, found: usize },
    #[error("invalid model: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
}
