use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate basis: |det| = {det:e} <= tolerance {tol:e}")]
    DegenerateBasis { det: f64, tol: f64 },

    #[error("too few seed correspondences: {0}")]
    TooFewSeeds(String),

    #[error("too few graph nodes: {nodes} nodes for k = {k}")]
    TooFewNodes { nodes: usize, k: usize },

    #[error("feature row {0} has zero norm")]
    ZeroNormRow(usize),

    #[error("design matrix is rank deficient (rank {rank}, need 8)")]
    RankDeficient { rank: usize },

    #[error("no pose candidate places the points in front of both cameras")]
    NoCheiralitySupport,

    #[error("point maps to infinity (|w| = {0:e})")]
    PointAtInfinity(f64),

    #[error("could not place {what} after {attempts} attempts")]
    PlacementFailure { what: &'static str, attempts: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, surfaced by the CLI in its error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateBasis { .. } => "geometry.degenerate_basis",
            Error::TooFewSeeds(_) => "encoding.too_few_seeds",
            Error::TooFewNodes { .. } => "matching.too_few_nodes",
            Error::ZeroNormRow(_) => "matching.zero_norm_row",
            Error::RankDeficient { .. } => "epipolar.rank_deficient",
            Error::NoCheiralitySupport => "epipolar.no_cheirality_support",
            Error::PointAtInfinity(_) => "synth.point_at_infinity",
            Error::PlacementFailure { .. } => "synth.placement_failure",
            Error::ShapeMismatch(_) => "core.shape_mismatch",
            Error::ConfigInvalid(_) => "cli.config_invalid",
            Error::Parse { .. } => "cli.parse_error",
            Error::Io(_) => "cli.io_error",
            Error::Json(_) => "cli.json_error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
