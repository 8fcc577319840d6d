use thiserror::Error;

/// Failure modes shared across the laboratory modules.
///
/// Variant names follow the operation contracts: `Regime` marks inputs
/// outside an operation's validity range (wrong exponent interval, bad
/// dimension), while the remaining variants report numerical breakdowns.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input parameters fall outside the operation's validity regime.
    #[error("regime: {0}")]
    Regime(String),
    /// Initial shooting bracket could not be classified.
    #[error("no-bracket: {0}")]
    NoBracket(String),
    /// Tail fit window shows no plateau.
    #[error("no-plateau: {0}")]
    NoPlateau(String),
    /// Requested integral diverges for these exponents.
    #[error("divergent: {0}")]
    Divergent(String),
    /// Iteration failed to reach its tolerance.
    #[error("not-converged: {0}")]
    NotConverged(String),
    /// Degenerate evaluation point (e.g. Green function on the diagonal).
    #[error("degenerate: {0}")]
    Degenerate(String),
    /// A point lies outside the domain.
    #[error("outside: {0}")]
    Outside(String),
    /// A random walk exceeded the step cap.
    #[error("max-steps: walk exceeded {0} steps")]
    MaxSteps(usize),
    /// Monte Carlo error exceeds the requested budget.
    #[error("variance: {0}")]
    Variance(String),
    /// Spike configuration violates the admissible set.
    #[error("config: {0}")]
    Config(String),
    /// Quadrature failed to converge.
    #[error("quadrature: {0}")]
    Quadrature(String),
    /// Right-hand side is not integrable against the radial weight.
    #[error("singular-rhs: {0}")]
    SingularRhs(String),
    /// Newton iteration diverged; payload carries the last residual.
    #[error("newton-diverged: last residual {0:.3e}")]
    NewtonDiverged(f64),
    /// A solve lost positivity.
    #[error("negative-solution: {0}")]
    NegativeSolution(String),
    /// Continuation branch too short for a rate fit.
    #[error("insufficient-branch: {0}")]
    InsufficientBranch(String),
    /// Every optimizer run terminated on the configuration boundary.
    #[error("no-interior-min: {0}")]
    NoInteriorMin(String),
    /// Heatmap emission received an empty grid.
    #[error("empty-grid")]
    EmptyGrid,
}
