use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("design is not unisolvent: rank {rank}, need {required}")]
    NotUnisolvent { rank: usize, required: usize },

    #[error("saddle-point system is singular")]
    SingularSystem,

    #[error("negative predictive variance {value:e} at query {index}")]
    NegativeVariance { index: usize, value: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("kernel matrix is ill-conditioned (smallest eigenvalue {min_eigenvalue:e})")]
    IllConditioned { min_eigenvalue: f64 },

    #[error("custom kernel has no declared regularity")]
    UnknownRegularity,

    #[error("series order {order} exceeds kernel smoothness (max {max})")]
    SeriesTruncation { order: usize, max: usize },

    #[error("leading Wronskian block is singular (condition {condition:e})")]
    SingularWronskianBlock { condition: f64 },

    #[error("smoother interpolates at row {index} (M_ii = {diag})")]
    InterpolatingSmoother { index: usize, diag: f64 },

    #[error("non-positive leave-one-out variance at row {index}")]
    DegenerateVariance { index: usize },

    #[error("target dof {target} is unreachable (supremum {supremum})")]
    UnreachableDof { target: f64, supremum: f64 },

    #[error("models have bases of different sizes ({0} vs {1})")]
    IncomparableModels(usize, usize),

    #[error("smoothers are not proportional (deviation {deviation:e})")]
    NotProportional { deviation: f64 },

    #[error("only {usable} usable grid points, need at least 3")]
    InsufficientGrid { usable: usize },

    #[error("kernel is not a stationary radial family")]
    NotRadial,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotUnisolvent { .. } => "not_unisolvent",
            Error::SingularSystem => "singular_system",
            Error::NegativeVariance { .. } => "negative_variance",
            Error::DegenerateDesign(_) => "degenerate_design",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::UnknownRegularity => "unknown_regularity",
            Error::SeriesTruncation { .. } => "series_truncation",
            Error::SingularWronskianBlock { .. } => "singular_wronskian_block",
            Error::InterpolatingSmoother { .. } => "interpolating_smoother",
            Error::DegenerateVariance { .. } => "degenerate_variance",
            Error::UnreachableDof { .. } => "unreachable_dof",
            Error::IncomparableModels(..) => "incomparable_models",
            Error::NotProportional { .. } => "not_proportional",
            Error::InsufficientGrid { .. } => "insufficient_grid",
            Error::NotRadial => "not_radial",
            Error::InvalidInput(_) => "invalid_input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
