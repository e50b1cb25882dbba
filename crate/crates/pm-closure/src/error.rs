//! Crate-wide error type.
//!
//! Variants are grouped by pipeline stage; the CLI maps them onto process
//! exit codes (config errors -> 2, numerical failures -> 3, missing input -> 4).

use thiserror::Error;

/// Everything that can go wrong across the closure pipeline.
#[derive(Debug, Error)]
pub enum Error {
    // ---- spectral decomposition ----
    /// Eigenvector matrix condition number exceeded the diagonalizability
    /// bound; the linear part is (numerically) defective.
    #[error("linear part not diagonalizable: eigenvector condition number {cond:.3e} exceeds bound {bound:.3e}")]
    NonDiagonalizable { cond: f64, bound: f64 },

    /// The requested cutoff falls inside a conjugate (or exactly degenerate)
    /// eigenvalue pair, so the resolved/unresolved split is ill-defined.
    #[error("cutoff m = {m} splits an eigenvalue pair: Re beta_m = Re beta_m+1 = {re:.6e}")]
    CutoffSplitsPair { m: usize, re: f64 },

    /// A basis was used with a model it was not derived from.
    #[error("spectral basis does not match the model: {0}")]
    BasisMismatch(String),

    // ---- parameterization construction ----
    /// The implicit-Euler coefficient tau/(1 - beta_n tau) has a vanishing
    /// denominator for some parameterized mode.
    #[error("singular resolvent: 1 - beta_n*tau = 0 at mode {mode} (tau = {tau:.6e})")]
    SingularResolvent { mode: usize, tau: f64 },

    /// The cross non-resonance condition fails: some interaction coefficient
    /// is nonzero while its resonance denominator vanishes.
    #[error("non-resonance condition violated for {} index tuple(s); first offender (i,j,..;n) = {first:?}", .tuples.len())]
    ResonanceViolation {
        tuples: Vec<(Vec<usize>, usize)>,
        first: (Vec<usize>, usize),
    },

    // ---- diagnostics ----
    /// A normalized defect was requested but the reference energy vanishes.
    #[error("zero reference energy in normalized defect for mode {mode}")]
    ZeroEnergy { mode: usize },

    // ---- integration ----
    /// Trajectory blow-up: some |x_j| crossed the abort threshold.
    #[error("non-finite or blown-up state at step {step} (|x| = {magnitude:.3e})")]
    NonFinite { step: usize, magnitude: f64 },

    /// Optimizer iteration guard tripped; the best iterate so far is reported
    /// via the result payload of the calling routine.
    #[error("optimizer exceeded {max_iter} iterations (best tau so far {best_tau:.6e})")]
    MaxIterExceeded { max_iter: usize, best_tau: f64 },

    // ---- builtin model data ----
    /// The heat-flux diagnostics need the velocity/temperature mode-shape
    /// table, which is shipped as a separate data file.
    #[error("heat-flux field shapes unavailable: {0}")]
    MissingFieldShapes(String),

    // ---- persistence ----
    #[error("malformed {what} file: {detail}")]
    Format { what: &'static str, detail: String },

    /// Binary container damaged or truncated; offset points at the failure.
    #[error("trajectory file corrupt at byte {offset}: {detail}")]
    Corrupt { offset: u64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI should terminate with for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format { .. } | Error::BasisMismatch(_) => 2,
            Error::NonFinite { .. }
            | Error::MaxIterExceeded { .. }
            | Error::NonDiagonalizable { .. }
            | Error::CutoffSplitsPair { .. }
            | Error::SingularResolvent { .. }
            | Error::ResonanceViolation { .. }
            | Error::ZeroEnergy { .. } => 3,
            Error::Io(_) | Error::Corrupt { .. } | Error::MissingFieldShapes(_) => 4,
        }
    }
}
