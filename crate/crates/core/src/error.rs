use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("tail extrapolation did not converge: {0}")]
    Convergence(String),

    #[error("Newton shooting diverged after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("lattice mismatch: {0}")]
    Lattice(String),

    #[error("probe outside the lattice band: {0}")]
    Band(String),

    #[error("mass reaches the lattice boundary: {0}")]
    Boundary(String),

    #[error("closed form unavailable for |xi| * |t| = {product} < {threshold}")]
    OutsideClosedForm { product: f64, threshold: f64 },

    #[error(
        "high-energy limit disagrees with asymptotes by {discrepancy:e} (allowed {allowed:e})"
    )]
    Inconsistent { discrepancy: f64, allowed: f64 },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn ensure_finite(label: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{label} has non-finite components: {values:?}"
        )))
    }
}
