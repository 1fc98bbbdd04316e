use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("capacity error: {qubits} qubits exceeds the dense cap of {cap} qubits")]
    Capacity { qubits: usize, cap: usize },

    #[error("shape error in {context}: expected dimension {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The adaptive integrator could not make progress.
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}, {steps} steps taken)")]
    StepUnderflow { t: f64, h: f64, steps: usize },

    #[error("unfolding error: {0}")]
    Unfolding(String),

    #[error("bath state {index}: {source}")]
    BathState {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep point Jx = {jx}, seed = {seed}: {source}")]
    SweepPoint {
        jx: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code: 1 configuration, 2 numeric, 3 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 3,
            Error::Config(_) | Error::Toml(_) | Error::Io(_) | Error::Json(_) => 1,
            Error::BathState { source, .. } | Error::SweepPoint { source, .. } => source.exit_code(),
            Error::Shape { .. }
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::Numeric(_)
            | Error::StepUnderflow { .. }
            | Error::Unfolding(_) => 2,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            context,
            expected,
            got,
        }
    }
}
