use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed timestamp '{value}' at row {row}")]
    MalformedTimestamp { row: usize, value: String },
    #[error("non-monotone time at row {row}")]
    NonMonotoneTime { row: usize },
    #[error("timestamp at row {row} is not on the hourly grid")]
    OffGrid { row: usize },
    #[error("negative power {value} for site '{site}' at row {row}")]
    NegativePower { site: String, row: usize, value: f64 },
    #[error("value {value} for site '{site}' at row {row} exceeds nominal capacity {capacity}")]
    ExceedsCapacity {
        site: String,
        row: usize,
        value: f64,
        capacity: f64,
    },
    #[error("capacity mismatch: {0}")]
    CapacityMismatch(String),
    #[error("malformed value '{value}' at row {row}")]
    MalformedValue { row: usize, value: String },
    #[error("unmapped zone '{0}'")]
    UnmappedZone(String),
    #[error("missing observation for site {site} at time index {time}")]
    MissingCell { site: usize, time: usize },
    #[error("missing marginal for flat cell {0}")]
    MissingMarginal(usize),
    #[error("missing NWP forecast for origin index {origin} lead {lead}")]
    MissingNwp { origin: usize, lead: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty sample")]
    EmptySample,
    #[error("insufficient sample: need {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("rank-deficient design")]
    RankDeficient,
    #[error("too few rows: need {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("matrix is not positive semi-definite within jitter tolerance")]
    NotPositiveDefinite,
    #[error("variance {variance} is infeasible for a Beta density with mean {mean}")]
    InfeasibleVariance { mean: f64, variance: f64 },
    #[error("both regulation unit costs are zero; the expected cost is flat in the offer")]
    Indifferent,
    #[error("invalid cost specification: {0}")]
    InvalidCost(String),
    #[error("incompatible density grids: {0}")]
    IncompatibleGrids(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("model document: {0}")]
    ModelFormat(String),
    #[error("config: {0}")]
    Config(String),
}

/// Coarse error classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Config(_) => ErrorClass::Config,
            RankDeficient | NotPositiveDefinite | InfeasibleVariance { .. } | Indifferent | TooFewRows { .. } => {
                ErrorClass::Numeric
            }
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit_open(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "(0, 1)",
        })
    }
}

pub(crate) fn check_unit_closed(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected: "[0, 1]",
        })
    }
}
