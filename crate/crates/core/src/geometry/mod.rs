//! Spatio-temporal plane fitting and line geometry.

pub mod accumulator;
pub mod eigen;
pub mod line2d;
pub mod plane;

pub use accumulator::{EventAccumulator, EventWindow, Origin};
pub use eigen::{symmetric_eigen3, Sym3, SymmetricEigen3};
pub use line2d::InferredLine;
pub use plane::{
    angle_between_deg, canonical_normal, connected_length, direction_angle_deg, line_direction,
    line_length, line_midpoint, longest_bin_chain, point_line_distances, LengthModel,
    LineGeometry, MidpointMode, PlaneFit,
};
