use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("event at ({x}, {y}) outside sensor {width}x{height}")]
    OutOfBounds {
        x: u16,
        y: u16,
        width: u16,
        height: u16,
    },
    #[error("plane fit needs at least 3 events, got {0}")]
    InsufficientData(usize),
    #[error("degenerate point set: zero covariance")]
    DegenerateCovariance,
    #[error("plane normal parallel to the time axis carries no line direction")]
    DegenerateDirection,
    #[error("plane too close to the image plane for along-plane projection")]
    DegeneratePlane,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
