use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cluster {cluster} is disconnected")]
    DisconnectedCluster { cluster: usize },

    #[error("the quotient graph over clusters is disconnected")]
    DisconnectedQuotient,

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("pseudoinverse residual {residual:e} exceeds tolerance for {what}")]
    PseudoinverseResidual { what: &'static str, residual: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("cluster {cluster} too small for the lower-triangular construction (size {size})")]
    ClusterTooSmall { cluster: usize, size: usize },

    #[error("step size {dt} exceeds the cap {cap} needed to resolve the dither")]
    StepTooLarge { dt: f64, cap: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transition matrix singular at s = {s}")]
    SingularTransition { s: f64 },

    #[error("Lyapunov operator near singular (separation estimate {separation:e})")]
    LyapunovSingular { separation: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("no Hurwitz averaged block found on the amplitude grid")]
    NoFeasibleAmplitude,

    #[error("no stable epsilon in grid")]
    NoStableEpsilon,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFinite { .. }
                | Error::SingularTransition { .. }
                | Error::LyapunovSingular { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::PseudoinverseResidual { .. }
                | Error::StepTooLarge { .. }
        )
    }

    /// True when the analysis ran but found no acceptable answer.
    pub fn is_negative_verdict(&self) -> bool {
        matches!(self.root(), Error::NoFeasibleAmplitude | Error::NoStableEpsilon)
    }
}
