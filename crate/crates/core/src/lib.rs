//! Discrete-time simulation of a pedestrian-to-vehicle warning system.
//!
//! Pedestrians broadcast position beacons; vehicles that hear them decide,
//! with one of four increasingly selective rules, whether to warn the
//! driver. A ground-truth oracle flags dangerous approaches so missed
//! warnings can be counted.

pub mod alert;
pub mod calibration;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod trace;
pub mod tracktest;

pub use alert::{AlertEngine, AlertRecord, Algorithm, AlgorithmConfig, EndCause};
pub use channel::{Beacon, ChannelConfig};
pub use error::{ConfigError, Error, GeometryError, MetricsError, Result, ScenarioError, TraceError};
pub use geometry::{Heading, Point, Polygon, Segment};
pub use metrics::{aggregate, required_deceleration, run_metrics, AggregateMetrics, Deceleration, DecelParams, RunMetrics};
pub use oracle::DangerEvent;
pub use rng::SeedStream;
pub use scenario::{Bounds, Building, Crossing, ScenarioMap};
pub use sim::{simulate, RunResult};
pub use trace::{EntityKind, EntityState, Frame, SyntheticParams, TraceSequence};
