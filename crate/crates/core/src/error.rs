use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exclusion violation: more particles than modes ({particles} > {modes})")]
    TooManyParticles { particles: usize, modes: usize },

    #[error("exclusion violation: mode {0} appears more than once")]
    RepeatedMode(usize),

    #[error("mode {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("invalid mode count {0}: must be between 1 and {max}", max = crate::fock::MAX_MODES)]
    InvalidModeCount(usize),

    #[error("basis of {particles} particles in {modes} modes exceeds the supported dimension")]
    BasisTooLarge { particles: usize, modes: usize },

    #[error("basis mismatch: expected {expected}, found {found}")]
    BasisMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("matrix is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("operator does not preserve particle number: {0}")]
    NotNumberPreserving(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("cannot trace vacuum")]
    TraceVacuum,

    #[error("invalid domain spec: {0}")]
    InvalidDomain(String),

    #[error("reference modes must differ (mu = nu = {0})")]
    SameReferenceMode(usize),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("malformed input: {0}")]
    Decode(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Decode(e.to_string())
    }
}
