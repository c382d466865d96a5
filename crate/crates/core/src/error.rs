use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to
/// name the offending object (cube, point, parameter).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("unknown cube id {0}")]
    UnknownCube(usize),

    #[error("missing alpha result for cube (level {level}, index {index})")]
    MissingAlpha { level: i32, index: usize },

    #[error("point {point:?} is too close to the support (distance {distance:e} < {required:e})")]
    TooCloseToSupport {
        point: Vec<f64>,
        distance: f64,
        required: f64,
    },

    #[error("point {0:?} lies on the plane")]
    PointOnPlane(Vec<f64>),

    #[error("no admissible plane for point {0:?}")]
    NoAdmissiblePlane(Vec<f64>),

    #[error("point {point:?} is outside every Whitney cell of cube {cube}")]
    OutsideRegion { point: Vec<f64>, cube: usize },

    #[error("alpha({alpha}) >= c0 ({c0}) for cube {cube}: bilateral branch not applicable")]
    AlphaTooLarge { cube: usize, alpha: f64, c0: f64 },

    #[error("non-finite kernel value at x={x:?}, y={y:?}")]
    NonFinite { x: Vec<f64>, y: Vec<f64> },

    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("{0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numeric failures (solver breakdown, NaN) as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_numeric(),
            e => matches!(e, Error::Solver(_) | Error::NonFinite { .. }),
        }
    }

    /// Usage and configuration problems (bad file, bad values).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_config(),
            e => matches!(
                e,
                Error::Config(_) | Error::InvalidInput(_) | Error::ResolutionTooCoarse(_)
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
