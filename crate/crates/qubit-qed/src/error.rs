use thiserror::Error;

/// Errors produced by the library and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate levels: m_e = {m_e} must exceed m_g = {m_g}")]
    DegenerateLevels { m_e: f64, m_g: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole of the propagator at {0}")]
    Pole(String),

    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),

    #[error("operation requires the {expected} variant")]
    WrongVariant { expected: &'static str },

    #[error("diagram {diagram} is not defined for the {variant} variant")]
    NotApplicable { diagram: String, variant: &'static str },

    #[error("unknown diagram label: {0}")]
    UnknownDiagram(String),

    #[error("formfactor is not integrable: {0}")]
    Integrability(String),

    #[error("quadrature did not reach tolerance: estimated error {abs_err:e} on value {value:e}")]
    Quadrature { value: f64, abs_err: f64 },

    #[error("coupling too large: {name} = {value} >= 1")]
    CouplingTooLarge { name: &'static str, value: f64 },

    #[error("extrapolation unstable: {0}")]
    ExtrapolationUnstable(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("no convergence after {iterations} iterations from seed {seed}")]
    NoConvergence { iterations: usize, seed: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::DegenerateLevels { .. }
            | Error::Config(_)
            | Error::UnknownDiagram(_)
            | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::Pole(_)
            | Error::NonPositiveFrequency(_)
            | Error::WrongVariant { .. }
            | Error::NotApplicable { .. } => 3,
            Error::Integrability(_)
            | Error::Quadrature { .. }
            | Error::CouplingTooLarge { .. }
            | Error::ExtrapolationUnstable(_)
            | Error::GridTooCoarse(_) => 4,
            Error::NoConvergence { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
