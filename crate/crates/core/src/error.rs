use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma function pole at z = {re} + {im}i")]
    GammaPole { re: f64, im: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid H-function specification: {0}")]
    InvalidSpec(String),

    #[error("no separating contour: left poles reach {left}, right poles start at {right}")]
    NoSeparatingContour { left: f64, right: f64 },

    #[error("contour at c = {abscissa} passes within {distance:e} of a pole")]
    PoleOnContour { abscissa: f64, distance: f64 },

    #[error("Mellin-Barnes integrand does not decay along the contour ({0})")]
    NonDecaying(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("value {value} outside [0, 1] beyond tolerance while evaluating {what}")]
    Accuracy { what: &'static str, value: f64 },

    #[error("inverse SNR moment diverges: {0}")]
    DivergentMoment(String),

    #[error("root bracket not found after {expansions} expansions")]
    BracketFailure { expansions: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
