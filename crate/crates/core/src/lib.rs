//! Streaming detection and tracking of straight lines in event-camera data.
//!
//! Events pass a refractory/neighborhood filter, then are offered to
//! existing lines, then to clusters, and otherwise seed new clusters by chain
//! growth. Clusters whose events lie on a spatio-temporal plane are promoted
//! to lines; lines go through an initializing, active and hibernated life
//! cycle driven by periodic maintenance.
//!
//! All geometry is generic over [`Scalar`] (`f32` or `f64`).

pub mod cluster;
pub mod config;
pub mod engine;
pub mod error;
pub mod event;
pub mod filter;
pub mod geometry;
pub mod line;
pub mod scalar;

pub use cluster::{Chain, Cluster, ClusterConfig};
pub use config::{PolarityMode, PromotionPath, TrackerConfig};
pub use engine::{Disposition, MaintenanceReport, TrackSnapshot, Tracker, Tracker32, Tracker64, TrackerHandle};
pub use error::{Error, Result};
pub use event::{ms_to_us, Event, Micros, Polarity, Sae, SensorSize, TimeScale};
pub use filter::{EventFilter, FilterConfig, FilterOutcome};
pub use line::{Line, LineConfig, LineHistory, LineId, LineState, Transition, TransitionReason};
pub use scalar::Scalar;

pub type PlaneFit64 = geometry::PlaneFit<f64>;
pub type PlaneFit32 = geometry::PlaneFit<f32>;
