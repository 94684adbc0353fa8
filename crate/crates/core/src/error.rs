use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },

    #[error("negative demand at row {row}")]
    NegativeDemand { row: usize },

    #[error("gap at index {expected}")]
    IndexGap { expected: usize },

    #[error("empty series")]
    EmptySeries,

    #[error("window [{start}, {start}+{len}) out of range for series of length {available}")]
    WindowOutOfRange {
        start: usize,
        len: usize,
        available: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("action component {index} = {value} outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },

    #[error("degenerate heat pump temperatures: t_cond = {t_cond} <= t_evap = {t_evap}")]
    DegenerateTemperature { t_cond: f64, t_evap: f64 },

    #[error("operation log too small: {rows} rows, need at least {min}")]
    LogTooSmall { rows: usize, min: usize },

    #[error("degenerate log for {asset}: {what}")]
    DegenerateLog { asset: String, what: String },

    #[error("zero total demand in tolerance trace")]
    ZeroDemand,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("safety breach: fallback action infeasible (residual {residual:.4} MW, q_tol {q_tol:.4} MW)")]
    SafetyBreach { residual: f64, q_tol: f64 },

    #[error("no feasible action after {retries} retries")]
    RetriesExhausted { retries: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    BufferUnderfull { len: usize, batch: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("benchmark cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
