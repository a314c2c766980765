use thiserror::Error;

/// Errors raised by the random wave toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh resolution {resolution} is below the minimum of {minimum}")]
    InvalidResolution { resolution: usize, minimum: usize },

    #[error("tube point with sqrt(rho) = {sqrt_rho} lies outside the tube of radius {tube_radius}")]
    OutsideTube { sqrt_rho: f64, tube_radius: f64 },

    #[error("tube radius {0} must be positive")]
    InvalidTubeRadius(f64),

    #[error("no eigenvalue of the {model} falls in window {window}")]
    EmptyWindow { model: String, window: String },

    #[error("method {method} is not available for {model} with window {window}")]
    MethodMismatch {
        method: String,
        model: String,
        window: String,
    },

    #[error("degenerate field: variance A = {0} is not positive")]
    DegenerateField(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0})")]
    NotPositiveSemidefinite(f64),

    #[error("resolution {resolution} too coarse for frequency {frequency}: the 4N rule requires at least {required}")]
    ResolutionTooCoarse {
        resolution: usize,
        frequency: u32,
        required: usize,
    },

    #[error("log-space guard exceeded: 2(N+1)sqrt(rho) = {0} > 600")]
    Overflow(f64),

    #[error("root residual {residual:e} exceeds bound {bound:e}")]
    RootResidual { residual: f64, bound: f64 },

    #[error("eigenvalue iteration failed for a companion matrix of degree {0}")]
    EigenFailure(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A module error raised while processing one experiment parameter.
    #[error("{parameter}: {source}")]
    Experiment {
        parameter: String,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps the error with the name of the parameter being processed.
    pub fn at(self, parameter: impl Into<String>) -> Self {
        Error::Experiment {
            parameter: parameter.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
