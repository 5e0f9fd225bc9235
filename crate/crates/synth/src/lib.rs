//! Synthetic event streams with ground truth, and scoring of tracker output
//! against that truth.

mod error;
pub mod generate;
pub mod presets;
pub mod scene;
pub mod score;
pub mod truth;

pub use error::{SceneError, TruthError};
pub use generate::{generate, Generated};
pub use scene::{Keyframe, Motion, SceneSpec, TrackSpec};
pub use score::{score, Metrics, TrackRecord};
pub use truth::{GroundTruth, TruthSample};
