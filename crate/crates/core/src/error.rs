use thiserror::Error;

/// Errors raised by the numerical routines and file formats of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid resolution {n} is below the minimum of 8 points per axis")]
    ResolutionTooLow { n: usize },

    #[error("quadrature for {what} did not converge: estimate {estimate:e}, error {error:e}")]
    QuadratureNotConverged {
        what: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("out of range: {0}")]
    Range(String),

    #[error("potential is not admissible: {0}")]
    Admissibility(String),

    #[error("spheroidal foci coincide (|x - y| = {distance:e})")]
    DegenerateFoci { distance: f64 },

    #[error("kernel evaluated at a singular point (|x - y| = {distance:e})")]
    SingularPoint { distance: f64 },

    #[error("symbol denominator {denominator:e} is on the resonance set")]
    NearResonance { denominator: f64 },

    #[error("integrand has a non-integrable singularity: {0}")]
    NearSingular(String),

    #[error("grid geometry mismatch: {0}")]
    GridMismatch(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("Neumann series precondition failed: ||T^2||^(1/2) proxy = {proxy}")]
    SeriesDivergent { proxy: f64 },

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("potential difference vanishes identically")]
    ZeroDifference,

    #[error("inconsistent grid: {0}")]
    InconsistentGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
