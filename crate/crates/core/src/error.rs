//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by geometry, operator assembly, spectral and dynamics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate chart at u = ({u1}, {u2}): |X1 x X2| = {norm:e}")]
    DegenerateChart { u1: f64, u2: f64, norm: f64 },

    #[error("resolution {n1}x{n2} is below the minimum of {min} nodes per axis")]
    ResolutionTooLow { n1: usize, n2: usize, min: usize },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("operation requires a sphere-topology chart, got {0}")]
    UnsupportedTopology(&'static str),

    #[error("operation requires a surface of revolution, got {0}")]
    NotAxisymmetric(&'static str),

    #[error("mesh has {n} nodes, above the configured maximum of {max}")]
    MeshTooLarge { n: usize, max: usize },

    #[error("matrices were assembled on different meshes ({0} vs {1} nodes)")]
    MeshMismatch(usize, usize),

    #[error("off-surface offset {offset:e} is below the guard {guard:e}")]
    OffsetTooSmall { offset: f64, guard: f64 },

    #[error("energy matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("gamma_c equals gamma_m, the plasmonic map is undefined")]
    DegenerateContrast,

    #[error("lambda = 1/2 has no finite contrast")]
    LambdaHalf,

    #[error("density has zero energy norm")]
    ZeroNorm,

    #[error("no eigenpair falls inside the spectral window")]
    EmptyWindow,

    #[error("covector is zero")]
    ZeroCovector,

    #[error("flow left the admissible range at t = {t}: |xi| = {xi_norm:e}")]
    FlowBlowup { t: f64, xi_norm: f64 },

    #[error("Hamiltonian vanished along the flow at t = {0}")]
    AssumptionAViolated(f64),

    #[error("leaf fiber is empty")]
    EmptyFiber,

    #[error("bump radius {delta:e} is below three mesh spacings ({min:e})")]
    BumpUnresolved { delta: f64, min: f64 },

    #[error("Helmholtz kernel evaluated at zero distance")]
    ZeroDistance,

    #[error("|k| * diam = {0} exceeds the quasi-static guard {1}")]
    WavenumberTooLarge(f64, f64),

    #[error("Helmholtz single layer is numerically singular (reciprocal condition {0:e})")]
    SingularS(f64),

    #[error("resonance search stalled with residual {0:e}")]
    NoResonanceFound(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("unknown surface kind `{0}`")]
    UnknownKind(String),

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("invalid value at `{path}`: {reason}")]
    InvalidValue { path: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Whether the error comes from user input rather than from a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownKind(_)
                | Error::MissingField(_)
                | Error::InvalidValue { .. }
                | Error::InvalidSurface(_)
                | Error::ResolutionTooLow { .. }
                | Error::UnsupportedTopology(_)
                | Error::NotAxisymmetric(_)
                | Error::MeshTooLarge { .. }
                | Error::Io(_)
        )
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateChart { .. } => "DegenerateChart",
            Error::ResolutionTooLow { .. } => "ResolutionTooLow",
            Error::InvalidSurface(_) => "InvalidSurface",
            Error::UnsupportedTopology(_) => "UnsupportedTopology",
            Error::NotAxisymmetric(_) => "NotAxisymmetric",
            Error::MeshTooLarge { .. } => "MeshTooLarge",
            Error::MeshMismatch(..) => "MeshMismatch",
            Error::OffsetTooSmall { .. } => "OffsetTooSmall",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::DegenerateContrast => "DegenerateContrast",
            Error::LambdaHalf => "LambdaHalf",
            Error::ZeroNorm => "ZeroNorm",
            Error::EmptyWindow => "EmptyWindow",
            Error::ZeroCovector => "ZeroCovector",
            Error::FlowBlowup { .. } => "FlowBlowup",
            Error::AssumptionAViolated(_) => "AssumptionAViolated",
            Error::EmptyFiber => "EmptyFiber",
            Error::BumpUnresolved { .. } => "BumpUnresolved",
            Error::ZeroDistance => "ZeroDistance",
            Error::WavenumberTooLarge(..) => "WavenumberTooLarge",
            Error::SingularS(_) => "SingularS",
            Error::NoResonanceFound(_) => "NoResonanceFound",
            Error::Linalg(_) => "Linalg",
            Error::UnknownKind(_) => "UnknownKind",
            Error::MissingField(_) => "MissingField",
            Error::InvalidValue { .. } => "InvalidValue",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
