use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("time {t} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("expected {expected} eigenvalue functions, got {got}")]
    CountMismatch { expected: usize, got: usize },

    #[error("{what} is not symmetric (asymmetry {asym:e})")]
    NotSymmetric { what: &'static str, asym: f64 },

    #[error("the initial data do not span an independent family of Jacobi fields")]
    DegenerateBasis,

    #[error("evaluation map is singular at t = {t} (rank {rank} of {dim})")]
    SingularEvaluation { t: f64, rank: usize, dim: usize },

    #[error("subfamily does not have full index at t = {t}")]
    FullIndexViolation { t: f64 },

    #[error("a nonzero field of the subfamily vanishes at t = {t}")]
    VanishingField { t: f64 },

    #[error("unsupported model curvature {0}; rescale to -1, 0 or 1")]
    UnsupportedCurvature(f64),

    #[error("window [{lo}, {hi}] is inverted")]
    InvertedWindow { lo: f64, hi: f64 },

    #[error("subspaces do not match at t = {t} (projector gap {gap:e})")]
    SubspaceMismatch { t: f64, gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
