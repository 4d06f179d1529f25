use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the box on non-periodic axis {axis}")]
    OutOfDomain { point: Vec<f64>, axis: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported usage: {0}")]
    Usage(String),

    #[error("particle {index} left the tracking box at {position:?}")]
    ParticleEscaped { index: usize, position: Vec<f64> },

    #[error(
        "conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error(
        "operator is not positive definite (curvature {curvature:e} at iteration {iteration}); try a smaller particle ratio d"
    )]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("right-hand side violates periodic solvability: integral {integral:e} is not zero")]
    Solvability { integral: f64 },

    #[error("solution became unstable at t = {time}: error {error:e}")]
    Unstable { time: f64, error: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
