use thiserror::Error;

/// Errors surfaced by model evaluation, attack objectives, and the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input vector does not match the expected dimension.
    #[error("input shape mismatch for {what}: expected {expected}, got {got}")]
    InputShape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A flat parameter vector does not match the selector's length.
    #[error("selector shape mismatch: selected {expected} parameters, got {got}")]
    SelectorShape { expected: usize, got: usize },

    /// A class label lies outside `[0, num_classes)`.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    /// A configuration value violates its invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    /// A network failed its structural invariants.
    #[error("invalid network: {0}")]
    InvalidNetwork(&'static str),

    /// The solver produced a non-finite value.
    #[error("divergence: non-finite value at iteration {iteration}")]
    Divergence { iteration: usize },

    /// A dataset is empty or inconsistent.
    #[error("invalid dataset: {0}")]
    InvalidData(&'static str),
}
