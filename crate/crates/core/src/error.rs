use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (grid bounds, schedule, corrector).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that cannot be represented, e.g. a non-finite sample.
    #[error("data error: {0}")]
    Data(String),

    /// The call itself is malformed (grid mismatch, CFL violation, bad arguments).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical blow-up at t = {time}")]
    NumericalBlowup { time: f64 },

    /// The field has no zero level set.
    #[error("empty interface at t = {time}: field is strictly single-signed")]
    EmptyInterface { time: f64 },

    /// Trajectory snapshots are too sparse for the requested geometric test.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Requested time window falls outside the trajectory.
    #[error("range error: {0}")]
    Range(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
