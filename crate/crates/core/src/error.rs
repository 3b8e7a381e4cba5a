use thiserror::Error;

/// Errors raised by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid coin profile: {0}")]
    InvalidProfile(String),

    #[error("invalid walk spec: {0}")]
    InvalidSpec(String),

    #[error("site {site} is outside a lattice of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("coin amplitudes are both zero")]
    ZeroCoin,

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("field is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("open-boundary overflow: amplitude at site {site} would leave the lattice")]
    BoundaryOverflow { site: usize },

    #[error("hilbert dimension {dimension} exceeds the dense cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("coin profile is not homogeneous; momentum decomposition needs constant angles")]
    NotHomogeneous,

    #[error("operation requires a periodic lattice")]
    NotPeriodic,

    #[error("operation is only defined for one-dimensional lattices")]
    NotOneDimensional,

    #[error("spectral gap closes (min gap {gap:e} at k = {k})")]
    GapClosed { gap: f64, k: f64 },

    #[error("chiral symmetry violated: bloch vector leaves the chiral plane by {0:e}")]
    ChiralViolation(f64),

    #[error("winding integral {value} is not within 0.01 of an integer")]
    WindingResidual { value: f64 },

    #[error("expected exactly two domain walls in theta2, found {0}")]
    DomainWalls(usize),

    #[error("active coupler requires a real gain parameter, got {re} + {im}i")]
    NonRealGain { re: f64, im: f64 },

    #[error("passive coupler requires a purely imaginary chi, got {re} + {im}i")]
    NonImaginaryMixing { re: f64, im: f64 },

    #[error("invalid mode network: {0}")]
    InvalidNetwork(String),

    #[error("uncertainty relation violated (min eigenvalue {0:e}); operation is not symplectic")]
    UncertaintyViolation(f64),

    #[error("invalid gaussian state: {0}")]
    InvalidState(String),

    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),

    #[error("invalid scan: {0}")]
    InvalidScan(String),
}

pub type Result<T> = std::result::Result<T, Error>;
