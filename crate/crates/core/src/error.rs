use thiserror::Error;

/// Errors produced by the simulation and estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode: {0}")]
    InvalidMode(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid projector: {0}")]
    InvalidProjector(String),

    #[error("post-selection subspace l = {0} carries no amplitude")]
    EmptySubspace(u32),

    #[error("state is not physical: {0}")]
    NonPhysical(String),

    #[error("fringe data span {span:.6} rad is shorter than one period {period:.6} rad")]
    InsufficientSpan { span: f64, period: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("correlation E undefined: zero total counts")]
    UndefinedCorrelation,

    #[error("missing CHSH setting theta_a = {theta_a:.6}, theta_b = {theta_b:.6}")]
    IncompleteSettings { theta_a: f64, theta_b: f64 },

    #[error("anti-diagonal m_s + m_i = {0} carries no weight")]
    EmptyDiagonal(i32),

    #[error("measurement design has rank {rank} < 16")]
    RankDeficient { rank: usize },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
