use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("polygon boundary intersects itself")]
    SelfIntersecting,
    #[error("degenerate geometry: coincident points have no bearing")]
    CoincidentPoints,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid bounds: min must be below max on both axes")]
    InvalidBounds,
    #[error("crossing `{id}` has identical endpoints")]
    DegenerateCrossing { id: String },
    #[error("duplicate crossing id `{id}`")]
    DuplicateCrossing { id: String },
    #[error("crossing `{id}` lies outside the scenario bounds")]
    CrossingOutOfBounds { id: String },
    #[error("building `{id}`: {source}")]
    InvalidBuilding {
        id: String,
        #[source]
        source: GeometryError,
    },
    #[error("building `{id}` has vertex {index} outside the scenario bounds")]
    BuildingOutOfBounds { id: String, index: usize },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("non-uniform time step: expected {expected} s between frames, found {found} s at t={at}")]
    NonUniformStep { expected: f64, found: f64, at: f64 },
    #[error("time {t} is not on the {step} s step grid")]
    OffGrid { t: f64, step: f64 },
    #[error("frame times must be increasing (t={t})")]
    Unordered { t: f64 },
    #[error("entity `{id}` appears twice in the frame at t={t}")]
    DuplicateId { id: String, t: f64 },
    #[error("entity `{id}` reappears at t={t} after leaving the trace")]
    ReusedId { id: String, t: f64 },
    #[error("entity `{id}` changes kind at t={t}")]
    KindChanged { id: String, t: f64 },
    #[error("entity `{id}` has negative speed {speed} at t={t}")]
    NegativeSpeed { id: String, speed: f64, t: f64 },
    #[error("entity `{id}` has a non-finite value at t={t}")]
    NonFinite { id: String, t: f64 },
    #[error("t={t} is outside the trace horizon")]
    OutOfHorizon { t: f64 },
    #[error("trace has an empty frame at t={t}, which the CSV format cannot encode")]
    EmptyFrame { t: f64 },
    #[error("invalid step {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("pedestrian `{0}` has no beacon phase")]
    MissingPhase(String),
}

impl ConfigError {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { field, message: message.into() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("run has no vehicles; per-vehicle means are undefined")]
    NoVehicles,
    #[error("confidence intervals need at least 2 runs, got {0}")]
    TooFewRuns(usize),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
