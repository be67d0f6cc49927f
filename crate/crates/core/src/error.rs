use thiserror::Error;

/// Errors raised by the simulation modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("wavelength {wavelength_nm} nm outside valid range [{min_nm}, {max_nm}] nm of set `{set}`")]
    WavelengthOutOfRange {
        set: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("not phase-matchable: {0}")]
    NotPhaseMatchable(String),

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("super-unity heralding: conditional efficiency {eta_d} exceeds loss budget product {budget_product}")]
    SuperUnityHeralding { eta_d: f64, budget_product: f64 },

    #[error("zero overlap: {0}")]
    ZeroOverlap(String),

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },

    #[error("dip wings absent: {0}")]
    WingsAbsent(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::WavelengthOutOfRange { .. } => "wavelength_out_of_range",
            Error::NotPhaseMatchable(_) => "not_phase_matchable",
            Error::NoRootInBracket { .. } => "no_root_in_bracket",
            Error::InvalidInput(_) => "invalid_input",
            Error::Empty(_) => "empty_result",
            Error::SuperUnityHeralding { .. } => "super_unity_heralding",
            Error::ZeroOverlap(_) => "zero_overlap",
            Error::FitNonConvergence { .. } => "fit_non_convergence",
            Error::WingsAbsent(_) => "wings_absent",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
