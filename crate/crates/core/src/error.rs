use thiserror::Error;

/// Everything that can go wrong inside the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters supplied by the caller.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// The kernel does not keep the equilibrium in the null space.
    #[error("kernel violates detailed balance at node {node} (v = {velocity}): defect {defect:.3e}")]
    Balance {
        node: usize,
        velocity: f64,
        defect: f64,
    },

    #[error("power iteration did not converge after {iterations} iterations (last increment {increment:.3e})")]
    NoConvergence { iterations: usize, increment: f64 },

    /// A computed quantity broke an invariant it should satisfy by construction.
    #[error("internal consistency: {0}")]
    Inconsistent(String),

    #[error("Krein-Rutman bracket diverged: mu = {mu} at lambda = {lambda}")]
    Divergence { lambda: f64, mu: f64 },

    #[error("p = {p} outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { p: f64, lo: f64, hi: f64 },

    #[error("p = {p} outside the domain of the Hamiltonian")]
    Domain { p: f64 },

    #[error("CFL condition violated: dt * alpha / dx = {ratio:.4} exceeds {limit}")]
    Cfl { ratio: f64, limit: f64 },

    #[error("spectral solve failed at p = {p}: {source}")]
    Tabulation {
        p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("singular relaxation matrix at x-node {node} (eps = {eps}, dt = {dt})")]
    Singular { node: usize, eps: f64, dt: f64 },

    #[error("bound 0 <= f <= M violated by {excess:.3e} at x-node {node}, v-node {velocity_node}, t = {time}")]
    Bound {
        node: usize,
        velocity_node: usize,
        time: f64,
        excess: f64,
    },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
