use thiserror::Error;

/// Error type shared by all laboratory modules.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    /// Grid construction rejected an argument; carries the offending field.
    #[error("grid construction: {field}: {message}")]
    GridConstruction { field: &'static str, message: String },

    /// A field was used with a grid it does not live on.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Cutoff radii out of order or outside the grid extent.
    #[error("cutoff construction: {0}")]
    BadCutoff(String),

    /// Potential specification violates its invariants.
    #[error("potential spec: {0}")]
    BadPotential(String),

    /// Mollification scale below the grid resolution threshold.
    #[error("kernel unresolved: {0}")]
    KernelUnresolved(String),

    /// Weight specification violates its invariants.
    #[error("weight spec: {0}")]
    BadWeight(String),

    /// Operation not defined for the requested variant or domain kind.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Finite-difference step outside the admissible range.
    #[error("step out of range: {0}")]
    StepOutOfRange(String),

    /// Scan over an empty or inverted range.
    #[error("empty range: {0}")]
    EmptyRange(String),

    /// Operator input violates the semiclassical parameter range.
    #[error("operator spec: {0}")]
    BadOperator(String),

    /// Test function fails the compact-support requirement.
    #[error("support violation: {0}")]
    SupportViolation(String),

    /// The separation inequality needs a differentiable (mollified) potential.
    #[error("non-mollified potential: {0}")]
    NonMollified(String),

    /// Iterative solver exhausted its iteration cap; carries the best residual.
    #[error("solver did not converge: best residual {best_residual:e}")]
    NonConvergence { best_residual: f64 },

    /// Experiment configuration violates its invariants.
    #[error("experiment config: {0}")]
    BadConfig(String),

    /// All-zero test function.
    #[error("degenerate test function: {0}")]
    DegenerateTestFunction(String),

    /// Fit requested with too few or non-positive data points.
    #[error("fit: {0}")]
    BadFit(String),
}
